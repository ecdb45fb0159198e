//! Self-checks against independent reference computations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::caf::{
    asymptotic_ca, classical_ca, delay_product_matrix, verify_series_identity, wrapped_frequency, SensingConfig,
};
use crate::detector::chi2_threshold;
use crate::error::Result;
use crate::signal::{SampleRecord, SignalModel};
use crate::sparse::{build_mask, undersample, MeasurementOperator};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Largest observed error.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Self { name: name.into(), error, tolerance, passed: error <= tolerance }
    }
}

fn random_record(n: usize, rng: &mut ChaCha8Rng) -> SampleRecord {
    let samples = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    SampleRecord::new(samples, 0)
}

/// CA by its defining double loop.
pub fn direct_ca(x: &[Complex64], k: usize, d: usize) -> Complex64 {
    let n = x.len();
    let kw = wrapped_frequency(k, n) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n.saturating_sub(d) {
        let phase = -2.0 * PI * (k * i % n) as f64 / n as f64;
        acc += x[i] * x[i + d].conj() * Complex64::from_polar(1.0, phase);
    }
    acc * Complex64::from_polar(1.0, -PI * kw * d as f64 / n as f64) / n as f64
}

/// Asymptotic CA as the truncated sum over sampling aliases of the
/// continuous-time CA, `|l| <= terms`, summed in pairs from the tail.
pub fn aliased_asymptotic_ca(k: usize, d: usize, model: &SignalModel, n: usize, terms: i64) -> Complex64 {
    let k_w = wrapped_frequency(k, n);
    let f = k_w as f64 / n as f64;
    let n_sym = model.n_sym as f64;
    if d >= model.n_sym || (f * n_sym - (f * n_sym).round()).abs() > 1e-12 {
        return Complex64::new(0.0, 0.0);
    }
    let span = n_sym - d as f64;
    let sinc = |x: f64| if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
    let term = |l: i64| -> Complex64 {
        let phase = PI * l as f64 * d as f64 + 2.0 * PI * l as f64 * model.d_phi;
        Complex64::from_polar(sinc((f + l as f64) * span), phase)
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for l in (1..=terms).rev() {
        sum += term(l) + term(-l);
    }
    sum += term(0);
    sum * model.sigma_a2 * span / n_sym * Complex64::from_polar(1.0, 2.0 * PI * f * model.d_phi)
}

/// Upper tail of the chi-squared density by composite Simpson integration.
pub fn chi2_tail_quadrature(t: f64, dof: usize) -> f64 {
    let k = dof as f64 / 2.0;
    // Gamma(k) by recurrence from Gamma(1) = 1 or Gamma(1/2) = sqrt(pi)
    let mut gamma = if dof.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut a = if dof.is_multiple_of(2) { 1.0 } else { 0.5 };
    while a < k {
        gamma *= a;
        a += 1.0;
    }
    let pdf = |x: f64| {
        if x <= 0.0 {
            if dof == 2 { 0.5 } else { 0.0 }
        } else {
            (-(x / 2.0) + (k - 1.0) * x.ln()).exp() / (2f64.powf(k) * gamma)
        }
    };
    let upper = t + 400.0 + 20.0 * dof as f64;
    let steps = 400_000;
    let h = (upper - t) / steps as f64;
    let mut s = pdf(t) + pdf(upper);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(t + i as f64 * h);
    }
    s * h / 3.0
}

pub fn check_series_identity() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for (k, n) in [(1, 8), (1, 4), (3, 8)] {
        worst = worst.max(verify_series_identity(k, n, 100_000)?);
    }
    Ok(CheckResult::new("series identity, 1e5 terms", worst, 1e-4))
}

pub fn check_chi2_quantiles() -> Result<Vec<CheckResult>> {
    let t = chi2_threshold(0.05, 8)?;
    let t2 = chi2_threshold(0.5, 2)?;
    Ok(vec![
        CheckResult::new("chi2 quantile 0.05/8 vs 15.5073", (t - 15.5073).abs(), 1e-3),
        CheckResult::new("chi2 quantile 0.5/2 vs 2 ln 2", (t2 - 2.0 * 2f64.ln()).abs(), 1e-6),
        CheckResult::new("chi2 tail quadrature at 0.05/8", (chi2_tail_quadrature(t, 8) - 0.05).abs(), 1e-8),
        CheckResult::new("chi2 tail quadrature at 0.5/2", (chi2_tail_quadrature(t2, 2) - 0.5).abs(), 1e-8),
    ])
}

pub fn check_direct_ca(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delays = [0, 1, 2, 5, 17];
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = random_record(64, &mut rng);
        let ca = classical_ca(&x, &delays)?;
        for (l, &d) in delays.iter().enumerate() {
            let scale = ca.columns[l].iter().map(|c| c.norm()).fold(0.0, f64::max);
            for k in 0..64 {
                let err = (ca.columns[l][k] - direct_ca(&x.samples, k, d)).norm();
                worst = worst.max(err / scale);
            }
        }
    }
    Ok(CheckResult::new("FFT estimator vs direct loop, N=64", worst, 1e-9))
}

pub fn check_asymptotic_aliasing(terms: i64) -> Result<CheckResult> {
    let n = 4000;
    let model = SignalModel::bpsk(8);
    let mut worst: f64 = 0.0;
    for d in 0..=4 {
        for m in 0..8 {
            let k = m * n / 8;
            let closed = asymptotic_ca(wrapped_frequency(k, n), d as i64, &model, n)?;
            worst = worst.max((closed - aliased_asymptotic_ca(k, d, &model, n, terms)).norm());
        }
        // an off-harmonic row is zero in both
        let off = asymptotic_ca(wrapped_frequency(123, n), d as i64, &model, n)?;
        worst = worst.max(off.norm());
    }
    Ok(CheckResult::new("closed-form asymptotic CA vs alias sum", worst, 1e-6))
}

pub fn check_measurement_round_trip(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SensingConfig { n: 256, m_avail: 96, delays: vec![1, 2, 3, 4], c_r: 0.15 };
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let x = random_record(cfg.n, &mut rng);
        let p = delay_product_matrix(&x, &cfg.delays)?;
        let mask = build_mask(&cfg, seed ^ t as u64)?;
        let direct = undersample(&p, &mask)?;
        let via_ca = MeasurementOperator::new(mask).apply(&classical_ca(&x, &cfg.delays)?)?;
        for (a, b) in direct.columns.iter().zip(&via_ca.columns) {
            let num: f64 = a.iter().zip(b).map(|(u, v)| (u - v).norm_sqr()).sum();
            let den: f64 = a.iter().map(|u| u.norm_sqr()).sum();
            worst = worst.max((num / den).sqrt());
        }
    }
    Ok(CheckResult::new("undersampled products vs operator on CA", worst, 1e-9))
}

/// Runs every check.
pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = vec![check_series_identity()?];
    out.extend(check_chi2_quantiles()?);
    out.push(check_direct_ca(100, seed)?);
    out.push(check_asymptotic_aliasing(1_000_000)?);
    out.push(check_measurement_round_trip(100, seed)?);
    Ok(out)
}
