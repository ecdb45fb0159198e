use num_complex::Complex64;
use serde::Serialize;

use crate::caf::{CycleAutocorrelationMatrix, DelayProductMatrix};
use crate::error::{Error, Result};

use super::dictionary::StructureDictionary;
use super::operator::{MeasurementOperator, SupportFit};

/// Output of a greedy recovery run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryState {
    /// Support rows in the order they were added.
    pub support: Vec<usize>,
    /// Per-delay supports when they were chosen independently (OMP).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_delay_support: Option<Vec<Vec<usize>>>,
    #[serde(skip)]
    pub estimate: CycleAutocorrelationMatrix,
    /// Residual l2 norm per delay after the last iteration.
    pub residual_norms: Vec<f64>,
    /// Residual l2 norms per delay, one entry per iteration (index 0 is the input).
    pub residual_history: Vec<Vec<f64>>,
    pub iterations_run: usize,
    /// A least-squares step fell back to the minimum-norm solution.
    pub rank_deficient: bool,
}

impl RecoveryState {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn check_inputs(p_u: &DelayProductMatrix, op: &MeasurementOperator, n_iter: usize) -> Result<()> {
    if n_iter == 0 {
        return Err(Error::config("at least one iteration is required"));
    }
    if p_u.rows() != op.m() {
        return Err(Error::shape(format!("{} measurement rows", op.m()), p_u.rows()));
    }
    if p_u.n_delays() == 0 {
        return Err(Error::config("at least one delay is required"));
    }
    Ok(())
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Argmax with lowest-index tie breaking over `scores[i]` for allowed `i`.
fn argmax(scores: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best
}

/// Builds the estimate from per-delay fits on a shared support.
fn assemble(n: usize, delays: &[usize], support: &[usize], fits: &[SupportFit]) -> CycleAutocorrelationMatrix {
    let mut ca = CycleAutocorrelationMatrix::zeros(n, delays);
    for (col, fit) in ca.columns.iter_mut().zip(fits) {
        for (&k, &c) in support.iter().zip(&fit.coefficients) {
            col[k] = c;
        }
    }
    ca
}

/// Residual-energy floor below which further iterations are pointless.
fn exhausted(norms: &[f64], initial: &[f64]) -> bool {
    norms
        .iter()
        .zip(initial)
        .all(|(r, r0)| *r <= 1e-12 * r0.max(f64::MIN_POSITIVE))
}

/// Simultaneous OMP: one support shared by all delays, atoms chosen by the
/// l1 norm of their correlation with the residuals across delays.
pub fn somp_estimate(
    p_u: &DelayProductMatrix,
    op: &MeasurementOperator,
    n_iter: usize,
) -> Result<RecoveryState> {
    check_inputs(p_u, op, n_iter)?;
    let n = op.n();
    let initial: Vec<f64> = p_u.columns.iter().map(|c| l2(c)).collect();
    let mut residuals = p_u.columns.clone();
    let mut support: Vec<usize> = Vec::new();
    let mut in_support = vec![false; n];
    let mut history = vec![initial.clone()];
    let mut fits = Vec::new();
    let mut rank_deficient = false;

    for _ in 0..n_iter {
        if exhausted(history.last().unwrap(), &initial) || support.len() == n {
            break;
        }
        let mut score = vec![0.0; n];
        for r in &residuals {
            for (s, m) in score.iter_mut().zip(op.correlation_magnitudes(r)?) {
                *s += m;
            }
        }
        let Some((j, _)) = argmax((0..n).filter(|&j| !in_support[j]).map(|j| (j, score[j]))) else {
            break;
        };
        support.push(j);
        in_support[j] = true;
        fits = op.fit_support(p_u, &support)?;
        rank_deficient |= fits.iter().any(|f| f.rank_deficient);
        residuals = fits.iter().map(|f| f.residual.clone()).collect();
        history.push(residuals.iter().map(|r| l2(r)).collect());
    }

    let estimate = assemble(n, &p_u.delays, &support, &fits);
    Ok(RecoveryState {
        iterations_run: history.len() - 1,
        residual_norms: history.last().unwrap().clone(),
        residual_history: history,
        support,
        per_delay_support: None,
        estimate,
        rank_deficient,
    })
}

/// Plain OMP run independently on every delay column.
///
/// The merged `support` lists indices iteration by iteration, delays in
/// order within an iteration, without repeats.
pub fn omp_estimate(
    p_u: &DelayProductMatrix,
    op: &MeasurementOperator,
    n_iter: usize,
) -> Result<RecoveryState> {
    check_inputs(p_u, op, n_iter)?;
    let runs = p_u
        .columns
        .iter()
        .zip(&p_u.delays)
        .map(|(col, &d)| {
            let single = DelayProductMatrix {
                columns: vec![col.clone()],
                delays: vec![d],
            };
            somp_estimate(&single, op, n_iter)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = op.n();
    let mut estimate = CycleAutocorrelationMatrix::zeros(n, &p_u.delays);
    let mut merged = Vec::new();
    let mut seen = vec![false; n];
    let longest = runs.iter().map(|r| r.support.len()).max().unwrap_or(0);
    for i in 0..longest {
        for run in &runs {
            if let Some(&k) = run.support.get(i) {
                if !std::mem::replace(&mut seen[k], true) {
                    merged.push(k);
                }
            }
        }
    }
    for (col, run) in estimate.columns.iter_mut().zip(&runs) {
        col.clone_from(&run.estimate.columns[0]);
    }
    let iterations_run = runs.iter().map(|r| r.iterations_run).max().unwrap_or(0);
    let residual_history = (0..=iterations_run)
        .map(|i| {
            runs.iter()
                .map(|r| r.residual_history[i.min(r.residual_history.len() - 1)][0])
                .collect()
        })
        .collect();
    Ok(RecoveryState {
        support: merged,
        per_delay_support: Some(runs.iter().map(|r| r.support.clone()).collect()),
        estimate,
        residual_norms: runs.iter().map(|r| r.residual_norms[0]).collect(),
        residual_history,
        iterations_run,
        rank_deficient: runs.iter().any(|r| r.rank_deficient),
    })
}

/// Dictionary-assisted greedy recovery.
///
/// The support starts at DC, which is fitted before the first selection so
/// that its leakage does not dominate the scores. Each iteration scores every candidate word `j`
/// by the l1 norm over delays of `|residual^H A| D_l[:, j]`, adds the best
/// word's rows (the candidate row `j` first, then the remaining rows in
/// ascending order) and refits. Words already contained in the support are
/// skipped.
pub fn hades_estimate(
    p_u: &DelayProductMatrix,
    op: &MeasurementOperator,
    n_iter: usize,
    dicts: &[StructureDictionary],
) -> Result<RecoveryState> {
    check_inputs(p_u, op, n_iter)?;
    let n = op.n();
    if dicts.len() != p_u.n_delays() {
        return Err(Error::config(format!(
            "{} dictionaries for {} delays",
            dicts.len(),
            p_u.n_delays()
        )));
    }
    for d in dicts {
        if d.n != n || d.n_candidates() != n / 2 {
            return Err(Error::shape(format!("{n}x{} dictionary", n / 2), format!("{}x{}", d.n, d.n_candidates())));
        }
        if d.kind != dicts[0].kind {
            return Err(Error::config("dictionaries must all be of one kind"));
        }
    }
    let words: Vec<Vec<usize>> = (1..=n / 2)
        .map(|j| {
            let mut rows: Vec<usize> = dicts
                .iter()
                .flat_map(|d| d.word(j).iter().filter(|e| e.1 != 0.0).map(|e| e.0))
                .collect();
            rows.sort_unstable();
            rows.dedup();
            rows
        })
        .collect();

    let initial: Vec<f64> = p_u.columns.iter().map(|c| l2(c)).collect();
    let mut support = vec![0usize];
    let mut in_support = vec![false; n];
    in_support[0] = true;
    let mut fits = op.fit_support(p_u, &support)?;
    let mut rank_deficient = fits.iter().any(|f| f.rank_deficient);
    let mut residuals: Vec<Vec<Complex64>> = fits.iter().map(|f| f.residual.clone()).collect();
    let mut history = vec![residuals.iter().map(|r| l2(r)).collect::<Vec<_>>()];

    for _ in 0..n_iter {
        if exhausted(history.last().unwrap(), &initial) {
            break;
        }
        let mut score = vec![0.0; n / 2];
        for (r, dict) in residuals.iter().zip(dicts) {
            let mags = op.correlation_magnitudes(r)?;
            for (s, col) in score.iter_mut().zip(&dict.columns) {
                *s += col.iter().map(|&(h, v)| mags[h] * v).sum::<f64>();
            }
        }
        let candidates = (1..=n / 2)
            .filter(|&j| words[j - 1].iter().any(|&h| !in_support[h]))
            .map(|j| (j, score[j - 1]));
        let Some((j, _)) = argmax(candidates) else {
            break;
        };
        let word = &words[j - 1];
        let mut added: Vec<usize> = Vec::with_capacity(word.len());
        if word.contains(&j) {
            added.push(j);
        }
        added.extend(word.iter().copied().filter(|&h| h != j));
        for h in added {
            if !std::mem::replace(&mut in_support[h], true) {
                support.push(h);
            }
        }
        fits = op.fit_support(p_u, &support)?;
        rank_deficient |= fits.iter().any(|f| f.rank_deficient);
        residuals = fits.iter().map(|f| f.residual.clone()).collect();
        history.push(residuals.iter().map(|r| l2(r)).collect());
    }

    let estimate = assemble(n, &p_u.delays, &support, &fits);
    Ok(RecoveryState {
        iterations_run: history.len() - 1,
        residual_norms: history.last().unwrap().clone(),
        residual_history: history,
        support,
        per_delay_support: None,
        estimate,
        rank_deficient,
    })
}

/// Least-squares recovery on a known support (the oracle variants).
pub fn oracle_estimate(
    p_u: &DelayProductMatrix,
    op: &MeasurementOperator,
    support: &[usize],
) -> Result<RecoveryState> {
    check_inputs(p_u, op, 1)?;
    let n = op.n();
    let mut seen = vec![false; n];
    for &k in support {
        if k >= n {
            return Err(Error::shape(format!("support row < {n}"), k));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::config(format!("support row {k} listed twice")));
        }
    }
    let initial: Vec<f64> = p_u.columns.iter().map(|c| l2(c)).collect();
    let fits = op.fit_support(p_u, support)?;
    let norms: Vec<f64> = fits.iter().map(|f| l2(&f.residual)).collect();
    Ok(RecoveryState {
        support: support.to_vec(),
        per_delay_support: None,
        estimate: assemble(n, &p_u.delays, support, &fits),
        residual_norms: norms.clone(),
        residual_history: vec![initial, norms],
        iterations_run: 1,
        rank_deficient: fits.iter().any(|f| f.rank_deficient),
    })
}

/// The first non-DC support index, folded into `1..=N/2`.
pub fn primary_cycle_frequency(state: &RecoveryState) -> Result<usize> {
    let n = state.estimate.n();
    state
        .support
        .iter()
        .find(|&&k| k != 0)
        .map(|&k| k.min(n - k))
        .ok_or(Error::NoCycleFrequency)
}
