//! Monte-Carlo experiment driver.

mod metrics;
mod plan;
mod sweep;
mod trial;

pub use metrics::{
    alarm_rate, exceed_rate, failures, pfa_required, recovery_summary, MetricRecord, TrialSummary,
};
pub use plan::{ExperimentPlan, Method, SCHEMA_VERSION};
pub use sweep::{config_hash, run_point, run_sweep, write_csv, Manifest, ManifestFile, SweepResults};
pub use trial::{sparse_window_len, stream_seed, Input, Pipeline, RecoveryMetrics, TrialOutcome};
