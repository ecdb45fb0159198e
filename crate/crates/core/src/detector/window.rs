use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency-smoothing window of odd length `L`, indexed `s = -(L-1)/2 ..= (L-1)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub weights: Vec<f64>,
    /// Kaiser shape parameter, `None` for other shapes.
    pub alpha: Option<f64>,
}

impl SpectralWindow {
    /// Kaiser window with `beta = alpha`, scaled so the weights sum to `L`.
    pub fn kaiser(len: usize, alpha: f64) -> Result<Self> {
        check_len(len)?;
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::config(format!("Kaiser parameter must be nonnegative, got {alpha}")));
        }
        let mut weights: Vec<f64> = if len == 1 {
            vec![1.0]
        } else {
            let denom = bessel_i0(alpha);
            (0..len)
                .map(|n| {
                    let t = 2.0 * n as f64 / (len - 1) as f64 - 1.0;
                    bessel_i0(alpha * (1.0 - t * t).max(0.0).sqrt()) / denom
                })
                .collect()
        };
        normalize(&mut weights);
        Ok(Self { weights, alpha: Some(alpha) })
    }

    /// All-ones window of length `L`.
    pub fn rectangular(len: usize) -> Result<Self> {
        check_len(len)?;
        Ok(Self { weights: vec![1.0; len], alpha: None })
    }

    /// Arbitrary weights, used as given.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        Self { weights, alpha: None }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn half_width(&self) -> usize {
        self.weights.len() / 2
    }

    /// Weight at offset `s`.
    pub fn at(&self, s: i64) -> f64 {
        self.weights[(s + self.half_width() as i64) as usize]
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.len())
    }
}

fn check_len(len: usize) -> Result<()> {
    if len == 0 || len.is_multiple_of(2) {
        return Err(Error::config(format!("window length must be odd, got {len}")));
    }
    Ok(())
}

fn normalize(w: &mut [f64]) {
    let sum: f64 = w.iter().sum();
    let scale = w.len() as f64 / sum;
    for v in w {
        *v *= scale;
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
