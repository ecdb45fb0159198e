use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::caf::{
    asymptotic_ca_matrix, classical_ca, delay_product_matrix, harmonic_rows, CycleAutocorrelationMatrix,
};
use crate::detector::{sparse_tdt_statistic, tdt_statistic, SpectralWindow, TestResult};
use crate::error::{Error, Result};
use crate::signal::{add_awgn, generate_h0, generate_signal, SampleRecord};
use crate::sparse::{
    build_asymptotic_dictionary, build_mask, build_symmetry_dictionary, hades_estimate, oracle_estimate,
    omp_estimate, somp_estimate, undersample, MeasurementOperator, StructureDictionary,
};

use super::plan::{ExperimentPlan, Method};

/// Which hypothesis a trial draws its input from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Input {
    H0,
    H1 { snr_db: f64 },
}

/// Seed of one PRNG stream. Streams depend on the master seed, a stream tag
/// and the trial index only, so every method and grid point sees the same
/// signal, noise shape and mask in trial `t`.
pub fn stream_seed(master: u64, tag: &str, trial: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(trial.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Support-recovery and estimation quality of an H1 trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub hit: bool,
    /// `None` when the method produces no support (classical estimator).
    pub full_support_hit: Option<bool>,
    pub index_error: f64,
    pub mse_overall: f64,
    pub mse_spikes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// Test statistic; `None` when recovery found no cycle frequency.
    pub statistic: Option<f64>,
    pub dof: usize,
    pub k_test: Option<usize>,
    pub support: Vec<usize>,
    pub regularized: bool,
    pub recovery: Option<RecoveryMetrics>,
    pub estimate: Option<CycleAutocorrelationMatrix>,
}

/// Precomputed per-plan data shared by all trials.
pub struct Pipeline {
    pub plan: ExperimentPlan,
    window: SpectralWindow,
    symmetry: Vec<StructureDictionary>,
    asymptotic: Vec<StructureDictionary>,
    reference_n: CycleAutocorrelationMatrix,
    reference_m: CycleAutocorrelationMatrix,
}

impl Pipeline {
    pub fn new(plan: &ExperimentPlan) -> Result<Self> {
        plan.validate()?;
        let model = plan.model();
        let asymptotic = if plan.methods.contains(&Method::HadesAsy) {
            plan.delays
                .iter()
                .map(|&d| build_asymptotic_dictionary(plan.n, d, model.sigma_a2))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            window: SpectralWindow::kaiser(plan.window_len, plan.kaiser_alpha)?,
            symmetry: vec![build_symmetry_dictionary(plan.n)?; plan.delays.len()],
            asymptotic,
            reference_n: asymptotic_ca_matrix(&model, plan.n, &plan.delays)?,
            reference_m: asymptotic_ca_matrix(&model, plan.m, &plan.delays)?,
            plan: plan.clone(),
        })
    }

    /// The trial's input block of `N` samples.
    pub fn input(&self, input: Input, trial: u64) -> Result<SampleRecord> {
        let seed = self.plan.seed;
        match input {
            Input::H0 => generate_h0(self.plan.n, 1.0, stream_seed(seed, "h0", trial)),
            Input::H1 { snr_db } => {
                let x = generate_signal(&self.plan.model(), self.plan.n, stream_seed(seed, "signal", trial))?;
                add_awgn(&x, snr_db, stream_seed(seed, "noise", trial))
            }
        }
    }

    /// Runs one trial of `method` and scores it.
    pub fn run_trial(&self, method: Method, input: Input, c_r: f64, trial: u64) -> Result<TrialOutcome> {
        let record = self.input(input, trial)?;
        let mask_seed = stream_seed(self.plan.seed, "mask", trial);
        let (estimate, support, test) = self.detect(method, &record, c_r, mask_seed)?;
        let short_circuit = test.k_test == 0;
        let k_test = (!short_circuit).then_some(test.k_test);
        let recovery = match input {
            Input::H1 { .. } => Some(self.score(method, &estimate, &support, k_test)?),
            Input::H0 => None,
        };
        Ok(TrialOutcome {
            statistic: (!short_circuit).then_some(test.statistic),
            dof: test.dof,
            k_test,
            support,
            regularized: test.regularized,
            recovery,
            estimate: Some(estimate),
        })
    }

    /// Full detection pipeline on one sample block: CA estimate, support and
    /// test statistic (verdict unset).
    pub fn detect(
        &self,
        method: Method,
        record: &SampleRecord,
        c_r: f64,
        mask_seed: u64,
    ) -> Result<(CycleAutocorrelationMatrix, Vec<usize>, TestResult)> {
        let plan = &self.plan;
        if record.len() < plan.n {
            return Err(Error::shape(format!("{} samples", plan.n), record.len()));
        }
        let model = plan.model();
        if method == Method::ClassicOracle {
            let ca = classical_ca(&record.prefix(plan.m)?, &plan.delays)?;
            let k = model.fundamental_bin(plan.m).expect("validated plan");
            let test = tdt_statistic(&ca, k, &self.window)?;
            return Ok((ca, Vec::new(), test));
        }
        let cfg = plan.sensing(c_r);
        let p = delay_product_matrix(&record.prefix(plan.n)?, &plan.delays)?;
        let mask = build_mask(&cfg, mask_seed)?;
        let p_u = undersample(&p, &mask)?;
        let op = MeasurementOperator::new(mask);
        let fund = model.fundamental_bin(plan.n).expect("validated plan");
        let state = match method {
            Method::Omp => omp_estimate(&p_u, &op, plan.somp_iters)?,
            Method::Sober => somp_estimate(&p_u, &op, plan.somp_iters)?,
            Method::HadesSym => hades_estimate(&p_u, &op, plan.hades_iters, &self.symmetry)?,
            Method::HadesAsy => hades_estimate(&p_u, &op, plan.hades_iters, &self.asymptotic)?,
            Method::SoberOracle => {
                let mut support = vec![0];
                support.extend(harmonic_rows(&model, plan.n)?);
                oracle_estimate(&p_u, &op, &support)?
            }
            Method::HadesOracle => oracle_estimate(&p_u, &op, &[0, fund, plan.n - fund])?,
            Method::ClassicOracle => unreachable!(),
        };
        let len = sparse_window_len(plan.window_len, cfg.consecutive_count()).ok_or_else(|| {
            Error::config(format!(
                "{} consecutive samples leave no room for a smoothing window",
                cfg.consecutive_count()
            ))
        })?;
        let window = SpectralWindow::kaiser(len, plan.kaiser_alpha)?;
        let test = sparse_tdt_statistic(&p_u, &state, &cfg, &window)?;
        Ok((state.estimate, state.support, test))
    }

    fn score(
        &self,
        method: Method,
        estimate: &CycleAutocorrelationMatrix,
        support: &[usize],
        k_test: Option<usize>,
    ) -> Result<RecoveryMetrics> {
        let reference = if method.is_sparse() { &self.reference_n } else { &self.reference_m };
        let size = reference.n();
        let model = self.plan.model();
        let k_true = model.fundamental_bin(size).expect("validated plan");
        let index_error = k_test.map_or(size as f64 / 2.0, |k| (k as f64 - k_true as f64).abs());
        let full_support_hit = method.is_sparse().then(|| {
            let mut got = support.to_vec();
            got.sort_unstable();
            got == true_support(reference)
        });
        let md = reference.n_delays() as f64;
        let mse_overall = estimate.frobenius_dist_sqr(reference)? / (size as f64 * md);
        let spikes = harmonic_rows(&model, size)?;
        let spike_err: f64 = spikes
            .iter()
            .flat_map(|&k| {
                estimate
                    .columns
                    .iter()
                    .zip(&reference.columns)
                    .map(move |(a, b)| (a[k] - b[k]).norm_sqr())
            })
            .sum();
        Ok(RecoveryMetrics {
            hit: k_test == Some(k_true),
            full_support_hit,
            index_error,
            mse_overall,
            mse_spikes: spike_err / (spikes.len() as f64 * md),
        })
    }
}

/// Rows where the reference CA is nonzero for some delay, plus DC.
fn true_support(reference: &CycleAutocorrelationMatrix) -> Vec<usize> {
    let peak = reference
        .columns
        .iter()
        .flatten()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let mut rows: Vec<usize> = (1..reference.n())
        .filter(|&k| reference.columns.iter().any(|c| c[k].norm() > 1e-12 * peak))
        .collect();
    rows.insert(0, 0);
    rows
}

/// Window length for the sparse test: `L`, shortened to the largest odd
/// length that fits the consecutive block.
pub fn sparse_window_len(window_len: usize, consecutive: usize) -> Option<usize> {
    if consecutive < 2 {
        return None;
    }
    let fit = if consecutive.is_multiple_of(2) { consecutive - 1 } else { consecutive - 2 };
    Some(window_len.min(fit))
}
