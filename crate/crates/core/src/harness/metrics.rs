use serde::{Deserialize, Serialize};

use crate::detector::{chi2_sf, chi2_threshold};
use crate::error::Result;

use super::plan::Method;
use super::trial::{RecoveryMetrics, TrialOutcome};

/// Per-trial data kept for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    /// `None` for a short-circuited (no cycle frequency) or failed trial.
    pub statistic: Option<f64>,
    pub dof: usize,
    pub recovery: Option<RecoveryMetrics>,
    pub failed: bool,
}

impl TrialSummary {
    pub fn failure(dof: usize) -> Self {
        Self { statistic: None, dof, recovery: None, failed: true }
    }
}

impl From<TrialOutcome> for TrialSummary {
    fn from(o: TrialOutcome) -> Self {
        Self { statistic: o.statistic, dof: o.dof, recovery: o.recovery, failed: false }
    }
}

/// One row of any output family. Fields a family does not report stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub method: Method,
    pub snr_db: Option<f64>,
    pub pfa_nominal: Option<f64>,
    pub c_r: Option<f64>,
    pub pd: Option<f64>,
    pub pfa_empirical: Option<f64>,
    pub pfa_required: Option<f64>,
    pub hitrate: Option<f64>,
    pub full_support_hitrate: Option<f64>,
    pub mean_abs_index_error: Option<f64>,
    pub mse_overall: Option<f64>,
    pub mse_spikes: Option<f64>,
    pub trials: usize,
    pub failures: usize,
}

impl MetricRecord {
    pub const COLUMNS: [&'static str; 14] = [
        "method",
        "snr_db",
        "pfa_nominal",
        "c_r",
        "pd",
        "pfa_empirical",
        "pfa_required",
        "hitrate",
        "full_support_hitrate",
        "mean_abs_index_error",
        "mse_overall",
        "mse_spikes",
        "trials",
        "failures",
    ];

    pub fn empty(method: Method, trials: &[TrialSummary]) -> Self {
        Self {
            method,
            snr_db: None,
            pfa_nominal: None,
            c_r: None,
            pd: None,
            pfa_empirical: None,
            pfa_required: None,
            hitrate: None,
            full_support_hitrate: None,
            mean_abs_index_error: None,
            mse_overall: None,
            mse_spikes: None,
            trials: trials.len(),
            failures: failures(trials),
        }
    }
}

pub fn failures(trials: &[TrialSummary]) -> usize {
    trials.iter().filter(|t| t.failed).count()
}

fn dof(trials: &[TrialSummary]) -> usize {
    trials.iter().find(|t| !t.failed).map_or(1, |t| t.dof)
}

/// Fraction of trials whose statistic exceeds `threshold` strictly.
pub fn exceed_rate(trials: &[TrialSummary], threshold: f64) -> f64 {
    let n = trials.iter().filter(|t| t.statistic.is_some_and(|s| s > threshold)).count();
    n as f64 / trials.len() as f64
}

/// Fraction of trials declared H1 at the chi-squared threshold of `pfa`.
pub fn alarm_rate(trials: &[TrialSummary], pfa: f64) -> Result<f64> {
    Ok(exceed_rate(trials, chi2_threshold(pfa, dof(trials))?))
}

/// Nominal false-alarm rate that yields `target` empirically on these H0
/// trials: the chi-squared tail at the empirical `(1 - target)` quantile.
pub fn pfa_required(h0: &[TrialSummary], target: f64) -> f64 {
    let mut stats: Vec<f64> = h0.iter().map(|t| t.statistic.unwrap_or(0.0)).collect();
    stats.sort_by(|a, b| b.total_cmp(a));
    let k = (target * stats.len() as f64).round() as usize;
    let threshold = stats.get(k).copied().unwrap_or(0.0);
    chi2_sf(threshold, dof(h0))
}

/// Hitrates count failed trials as misses; error averages use the completed trials.
pub fn recovery_summary(method: Method, h1: &[TrialSummary]) -> MetricRecord {
    let done: Vec<&RecoveryMetrics> = h1.iter().filter_map(|t| t.recovery.as_ref()).collect();
    let total = h1.len() as f64;
    let mean = |f: &dyn Fn(&RecoveryMetrics) -> f64| {
        (!done.is_empty()).then(|| done.iter().map(|r| f(r)).sum::<f64>() / done.len() as f64)
    };
    let full: Vec<bool> = done.iter().filter_map(|r| r.full_support_hit).collect();
    MetricRecord {
        hitrate: Some(done.iter().filter(|r| r.hit).count() as f64 / total),
        full_support_hitrate: (!full.is_empty()).then(|| full.iter().filter(|&&b| b).count() as f64 / total),
        mean_abs_index_error: mean(&|r| r.index_error),
        mse_overall: mean(&|r| r.mse_overall),
        mse_spikes: mean(&|r| r.mse_spikes),
        ..MetricRecord::empty(method, h1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stat(s: Option<f64>) -> TrialSummary {
        TrialSummary { statistic: s, dof: 8, recovery: None, failed: false }
    }

    #[test]
    fn rates_are_exact_ratios() {
        let t = vec![stat(Some(20.0)), stat(Some(1.0)), stat(None), stat(Some(16.0))];
        assert_eq!(alarm_rate(&t, 0.05).unwrap(), 0.5);
        assert_eq!(exceed_rate(&t, f64::INFINITY), 0.0);
        assert_eq!(exceed_rate(&[stat(Some(1.0))], 0.0), 1.0);
    }

    #[test]
    fn required_pfa_of_exact_chi2_quantiles_is_nominal() {
        // statistics placed at the chi2_8 quantiles i/100 reproduce the nominal rate
        let t: Vec<_> = (1..100)
            .map(|i| stat(Some(chi2_threshold(i as f64 / 100.0, 8).unwrap())))
            .collect();
        let req = pfa_required(&t, 0.05);
        assert!((req - 0.06).abs() < 0.011, "{req}");
    }

    #[test]
    fn recovery_means() {
        let rec = |hit: bool, e: f64| TrialSummary {
            statistic: Some(1.0),
            dof: 8,
            recovery: Some(RecoveryMetrics {
                hit,
                full_support_hit: Some(hit),
                index_error: e,
                mse_overall: e,
                mse_spikes: 2.0 * e,
            }),
            failed: false,
        };
        let r = recovery_summary(Method::Sober, &[rec(true, 0.0), rec(false, 4.0), TrialSummary::failure(8)]);
        assert_eq!(r.hitrate, Some(1.0 / 3.0));
        assert_eq!(r.mean_abs_index_error, Some(2.0));
        assert_eq!(r.mse_spikes, Some(4.0));
        assert_eq!(r.failures, 1);
        assert_eq!(r.trials, 3);
    }
}
