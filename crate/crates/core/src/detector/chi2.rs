use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Upper tail `P(chi2_dof > t)`.
pub fn chi2_sf(t: f64, dof: usize) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    gamma_ur(dof as f64 / 2.0, t / 2.0)
}

/// Threshold `t` with `P(chi2_dof > t) = pfa`, by bisection on the
/// regularized upper incomplete gamma function.
pub fn chi2_threshold(pfa: f64, dof: usize) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::domain(format!("false-alarm rate must lie in (0, 1), got {pfa}")));
    }
    if dof == 0 {
        return Err(Error::domain("degrees of freedom must be positive"));
    }
    let mut lo = 0.0;
    let mut hi = dof as f64 + 1.0;
    while chi2_sf(hi, dof) > pfa {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(mid, dof) > pfa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
