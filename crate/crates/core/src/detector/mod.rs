//! Time-domain test for cyclostationarity and its sparse extension.

mod chi2;
mod tdt;
mod window;

pub use chi2::{chi2_sf, chi2_threshold};
pub use tdt::{
    consecutive_row, decide, decide_with_threshold, estimate_covariance, quadratic_statistic,
    smoothed_cyclic_spectrum, sparse_tdt_statistic, tdt_statistic, CovarianceEstimate, TestResult,
    TestVector, Verdict,
};
pub use window::{bessel_i0, SpectralWindow};
