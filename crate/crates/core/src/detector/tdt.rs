use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::caf::{ca_matrix_from_products, CycleAutocorrelationMatrix, DelayProductMatrix, SensingConfig};
use crate::error::{Error, Result};
use crate::sparse::{primary_cycle_frequency, RecoveryState};

use super::chi2::chi2_threshold;
use super::window::SpectralWindow;

const MAX_CONDITION: f64 = 1e12;
const LOADING: f64 = 1e-8;

/// Real and imaginary parts of one CA row, stacked.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVector {
    pub values: Vec<f64>,
}

impl TestVector {
    pub fn from_row(ca: &CycleAutocorrelationMatrix, k: usize) -> Self {
        let row = ca.row(k);
        let values = row.iter().map(|c| c.re).chain(row.iter().map(|c| c.im)).collect();
        Self { values }
    }

    pub fn n_delays(&self) -> usize {
        self.values.len() / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    /// `2 M_d x 2 M_d`, symmetric.
    pub matrix: DMatrix<f64>,
    pub window_length: usize,
    pub alpha: Option<f64>,
    /// CA size the estimate was computed from.
    pub source_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    H0,
    H1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub k_test: usize,
    pub statistic: f64,
    pub dof: usize,
    pub threshold: Option<f64>,
    pub pfa: Option<f64>,
    pub verdict: Option<Verdict>,
    /// The covariance needed diagonal loading before inversion.
    pub regularized: bool,
}

impl TestResult {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn check_window(window: &SpectralWindow, n: usize) -> Result<()> {
    window.validate()?;
    if window.len() >= n {
        return Err(Error::config(format!(
            "window length {} must be below the CA size {n}",
            window.len()
        )));
    }
    Ok(())
}

/// Frequency-smoothed cyclic periodogram of delays `m` and `n_` around row `k`.
///
/// Unconjugated: `1/(N L) sum_s W(s) C[k-s, n_] C[k+s, m]`.
/// Conjugated: `1/(N L) sum_s W(s) conj(C[k+s, n_]) C[k+s, m]`.
/// Rows wrap modulo `N`.
pub fn smoothed_cyclic_spectrum(
    ca: &CycleAutocorrelationMatrix,
    k: i64,
    m: usize,
    n_: usize,
    conjugated: bool,
    window: &SpectralWindow,
) -> Result<Complex64> {
    let n = ca.n();
    check_window(window, n)?;
    if m >= ca.n_delays() || n_ >= ca.n_delays() {
        return Err(Error::shape(format!("delay index < {}", ca.n_delays()), m.max(n_)));
    }
    let h = window.half_width() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for s in -h..=h {
        let w = window.at(s);
        let term = if conjugated {
            ca.at(k + s, n_).conj() * ca.at(k + s, m)
        } else {
            ca.at(k - s, n_) * ca.at(k + s, m)
        };
        acc += term * w;
    }
    Ok(acc / (n as f64 * window.len() as f64))
}

/// Covariance of `sqrt(N) r(k_test)` from smoothed periodograms of the CA.
///
/// The periodograms are taken of the unnormalized transform `N C`, hence the
/// `N^2` gain on both `Q` and `Q*`.
pub fn estimate_covariance(
    ca: &CycleAutocorrelationMatrix,
    k_test: usize,
    window: &SpectralWindow,
) -> Result<CovarianceEstimate> {
    let n = ca.n();
    check_window(window, n)?;
    if k_test >= n {
        return Err(Error::shape(format!("row < {n}"), k_test));
    }
    let md = ca.n_delays();
    let gain = (n * n) as f64;
    let k = k_test as i64;
    let mut sigma = DMatrix::zeros(2 * md, 2 * md);
    for a in 0..md {
        for b in 0..md {
            let q = smoothed_cyclic_spectrum(ca, k, a, b, false, window)? * gain;
            let qc = smoothed_cyclic_spectrum(ca, k, a, b, true, window)? * gain;
            sigma[(a, b)] = ((q + qc) / 2.0).re;
            sigma[(a, md + b)] = ((q - qc) / 2.0).im;
            sigma[(md + a, b)] = ((q + qc) / 2.0).im;
            sigma[(md + a, md + b)] = ((qc - q) / 2.0).re;
        }
    }
    let sym = (&sigma + sigma.transpose()) * 0.5;
    Ok(CovarianceEstimate {
        matrix: sym,
        window_length: window.len(),
        alpha: window.alpha,
        source_size: n,
    })
}

/// `N r Sigma^-1 r^T` via a symmetric eigendecomposition. Ill-conditioned or
/// indefinite covariances get diagonal loading; remaining nonpositive
/// eigenvalues are floored, so the result is never negative.
///
/// Returns the statistic and whether loading was applied.
pub fn quadratic_statistic(r: &TestVector, sigma: &DMatrix<f64>, n: usize) -> Result<(f64, bool)> {
    let dim = r.values.len();
    if sigma.nrows() != dim || sigma.ncols() != dim {
        return Err(Error::shape(format!("{dim}x{dim}"), format!("{}x{}", sigma.nrows(), sigma.ncols())));
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let mut lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let max = lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut regularized = false;
    if min <= 0.0 || max / min > MAX_CONDITION {
        regularized = true;
        let load = LOADING * sigma.trace() / dim as f64;
        let floor = (max.abs() / MAX_CONDITION).max(f64::MIN_POSITIVE);
        for l in &mut lambda {
            *l = (*l + load.max(0.0)).max(floor);
        }
    }
    let rv = DVector::from_column_slice(&r.values);
    let proj = eig.eigenvectors.transpose() * rv;
    let t: f64 = proj.iter().zip(&lambda).map(|(p, l)| p * p / l).sum();
    Ok(((n as f64 * t).min(f64::MAX), regularized))
}

/// Classical test at `k_test` with covariance estimated from the same CA.
pub fn tdt_statistic(
    ca: &CycleAutocorrelationMatrix,
    k_test: usize,
    window: &SpectralWindow,
) -> Result<TestResult> {
    let cov = estimate_covariance(ca, k_test, window)?;
    let r = TestVector::from_row(ca, k_test);
    let (statistic, regularized) = quadratic_statistic(&r, &cov.matrix, ca.n())?;
    Ok(TestResult {
        k_test,
        statistic,
        dof: 2 * ca.n_delays(),
        threshold: None,
        pfa: None,
        verdict: None,
        regularized,
    })
}

/// Row of the consecutive-block CA matching `k_test` of the full-size CA.
pub fn consecutive_row(k_test: usize, cfg: &SensingConfig) -> usize {
    let x = cfg.c_r * cfg.m_avail as f64 / cfg.n as f64 * k_test as f64;
    ((x - 1e-9).ceil() as usize).max(1)
}

/// Sparse test: the test vector comes from the recovered CA, the covariance
/// from the classical CA of the consecutive block of delay products, rescaled
/// by `sqrt(c_r M / N)`.
///
/// A recovery without any non-DC support yields `T = 0` and an `H0` verdict.
pub fn sparse_tdt_statistic(
    p_u: &DelayProductMatrix,
    state: &RecoveryState,
    cfg: &SensingConfig,
    window: &SpectralWindow,
) -> Result<TestResult> {
    cfg.validate()?;
    let n_c = cfg.consecutive_count();
    if n_c <= window.len() {
        return Err(Error::config(format!(
            "window length {} does not fit the {n_c} consecutive samples",
            window.len()
        )));
    }
    if p_u.rows() < n_c {
        return Err(Error::shape(format!("at least {n_c} measurement rows"), p_u.rows()));
    }
    let dof = 2 * p_u.n_delays();
    let k_test = match primary_cycle_frequency(state) {
        Ok(k) => k,
        Err(Error::NoCycleFrequency) => {
            return Ok(TestResult {
                k_test: 0,
                statistic: 0.0,
                dof,
                threshold: None,
                pfa: None,
                verdict: Some(Verdict::H0),
                regularized: false,
            })
        }
        Err(e) => return Err(e),
    };
    let block = DelayProductMatrix {
        columns: p_u.columns.iter().map(|c| c[..n_c].to_vec()).collect(),
        delays: p_u.delays.clone(),
    };
    let small = ca_matrix_from_products(&block)?;
    let k_c = consecutive_row(k_test, cfg);
    let cov = estimate_covariance(&small, k_c, window)?;
    let divisor = (cfg.c_r * cfg.m_avail as f64 / cfg.n as f64).sqrt();
    let sigma = cov.matrix / divisor;
    let r = TestVector::from_row(&state.estimate, k_test);
    let (statistic, regularized) = quadratic_statistic(&r, &sigma, cfg.n)?;
    Ok(TestResult {
        k_test,
        statistic,
        dof,
        threshold: None,
        pfa: None,
        verdict: None,
        regularized,
    })
}

/// Sets the verdict against a given threshold (`H1` iff `T > threshold`).
pub fn decide_with_threshold(result: &TestResult, threshold: f64) -> TestResult {
    let verdict = if result.statistic > threshold { Verdict::H1 } else { Verdict::H0 };
    TestResult {
        threshold: Some(threshold),
        verdict: Some(verdict),
        ..result.clone()
    }
}

/// Sets the verdict against the chi-squared threshold for `pfa`.
pub fn decide(result: &TestResult, pfa: f64) -> Result<TestResult> {
    let t = chi2_threshold(pfa, result.dof)?;
    Ok(TestResult {
        pfa: Some(pfa),
        ..decide_with_threshold(result, t)
    })
}
