use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::caf::{DelayProductMatrix, SensingConfig};
use crate::error::{Error, Result};

/// Row selection `S`: a consecutive prefix followed by a sorted random tail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMask {
    /// Selected rows of the full delay-product matrix.
    pub indices: Vec<usize>,
    /// Length of the consecutive prefix `0..consecutive_count`.
    pub consecutive_count: usize,
    /// Row count `N` of the full matrix.
    pub n: usize,
    pub seed: u64,
}

impl SamplingMask {
    /// Every row, in order.
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            consecutive_count: n,
            n,
            seed: 0,
        }
    }

    /// Arbitrary distinct rows; the consecutive prefix length is inferred.
    pub fn from_indices(n: usize, indices: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::shape(format!("row index < {n}"), i));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::config(format!("row {i} selected twice")));
            }
        }
        let consecutive_count = indices
            .iter()
            .enumerate()
            .take_while(|(pos, &i)| *pos == i)
            .count();
        Ok(Self {
            indices,
            consecutive_count,
            n,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Builds the mask for `cfg`: rows `0..ceil(c_r M)` plus a uniform random
/// subset of the remaining rows, sorted ascending.
pub fn build_mask(cfg: &SensingConfig, seed: u64) -> Result<SamplingMask> {
    if cfg.m_avail > cfg.n {
        return Err(Error::config(format!(
            "M = {} exceeds N = {}",
            cfg.m_avail, cfg.n
        )));
    }
    cfg.validate()?;
    let cc = cfg.consecutive_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tail: Vec<usize> = rand::seq::index::sample(&mut rng, cfg.n - cc, cfg.m_avail - cc)
        .into_iter()
        .map(|i| i + cc)
        .collect();
    tail.sort_unstable();
    let mut indices: Vec<usize> = (0..cc).collect();
    indices.extend(tail);
    Ok(SamplingMask {
        indices,
        consecutive_count: cc,
        n: cfg.n,
        seed,
    })
}

/// Rows of `p` selected by `mask`, order preserved.
pub fn undersample(p: &DelayProductMatrix, mask: &SamplingMask) -> Result<DelayProductMatrix> {
    let rows = p.rows();
    if let Some(&bad) = mask.indices.iter().find(|&&i| i >= rows) {
        return Err(Error::shape(format!("row index < {rows}"), bad));
    }
    Ok(DelayProductMatrix {
        columns: p
            .columns
            .iter()
            .map(|col| mask.indices.iter().map(|&i| col[i]).collect())
            .collect(),
        delays: p.delays.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn cfg(n: usize, m: usize, c_r: f64) -> SensingConfig {
        SensingConfig {
            n,
            m_avail: m,
            delays: vec![1],
            c_r,
        }
    }

    fn check_invariants(mask: &SamplingMask, n: usize, m: usize, cc: usize) {
        assert_eq!(mask.len(), m);
        assert_eq!(mask.consecutive_count, cc);
        assert_eq!(&mask.indices[..cc], &(0..cc).collect::<Vec<_>>()[..]);
        assert!(mask.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(mask.indices.iter().all(|&i| i < n));
    }

    #[test]
    fn small_mask() {
        let mask = build_mask(&cfg(8, 4, 0.5), 3).unwrap();
        check_invariants(&mask, 8, 4, 2);
        assert!(mask.indices[2..].iter().all(|&i| i >= 2));
    }

    #[test]
    fn table_parameters() {
        let mask = build_mask(&cfg(4000, 1000, 0.15), 7).unwrap();
        check_invariants(&mask, 4000, 1000, 150);
        let mask = build_mask(&cfg(4000, 1000, 0.01), 7).unwrap();
        check_invariants(&mask, 4000, 1000, 10);
    }

    #[test]
    fn mask_is_deterministic() {
        let c = cfg(1000, 250, 0.15);
        assert_eq!(build_mask(&c, 5).unwrap(), build_mask(&c, 5).unwrap());
        assert_ne!(build_mask(&c, 5).unwrap().indices, build_mask(&c, 6).unwrap().indices);
    }

    #[test]
    fn oversized_mask_is_rejected() {
        assert!(matches!(build_mask(&cfg(8, 9, 0.5), 0), Err(Error::Config(_))));
    }

    #[test]
    fn undersample_gathers_rows() {
        let col: Vec<Complex64> = (0..6).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let p = DelayProductMatrix {
            columns: vec![col.clone(), col.iter().map(|v| v * 2.0).collect()],
            delays: vec![1, 2],
        };
        assert_eq!(undersample(&p, &SamplingMask::full(6)).unwrap(), p);
        let first = undersample(&p, &SamplingMask::from_indices(6, vec![0]).unwrap()).unwrap();
        assert_eq!(first.columns[0], vec![col[0]]);
        let mask = SamplingMask::from_indices(6, vec![0, 1, 4]).unwrap();
        assert_eq!(mask.consecutive_count, 2);
        let u = undersample(&p, &mask).unwrap();
        assert_eq!(u.columns[1], vec![col[0] * 2.0, col[1] * 2.0, col[4] * 2.0]);
        let bad = SamplingMask::from_indices(9, vec![8]).unwrap();
        assert!(matches!(undersample(&p, &bad), Err(Error::Shape { .. })));
    }
}
