use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::caf::{symmetric_phase, CycleAutocorrelationMatrix, DelayProductMatrix};
use crate::dft;
use crate::error::{Error, Result};

use super::mask::SamplingMask;

/// Measurement operator `A = N S F^-1`, per delay composed with the inverse of
/// the estimator's symmetric phase so that `A_d c_d` reproduces the selected
/// delay products of the CA column `c_d`.
///
/// Atom `j` of delay `d` has entries `exp(j 2 pi j n_i / N) * exp(j pi j~ d / N)`
/// for the selected rows `n_i`. Nothing is stored densely: correlations with
/// all atoms go through one length-`N` FFT and least-squares problems only
/// materialize the atoms on the current support.
#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    mask: SamplingMask,
}

/// Least-squares fit on a support, shared by all greedy solvers.
#[derive(Debug, Clone)]
pub(crate) struct SupportFit {
    /// Coefficients in support order, already in CA phase convention.
    pub coefficients: Vec<Complex64>,
    pub residual: Vec<Complex64>,
    pub rank_deficient: bool,
}

impl MeasurementOperator {
    pub fn new(mask: SamplingMask) -> Self {
        Self { mask }
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    /// CA size `N`.
    pub fn n(&self) -> usize {
        self.mask.n
    }

    /// Number of measurements `M`.
    pub fn m(&self) -> usize {
        self.mask.len()
    }

    fn plain_atom_entry(&self, j: usize, row: usize) -> Complex64 {
        let n = self.n() as u128;
        // exact phase reduction keeps atoms bit-stable for large N
        let r = ((j as u128 * row as u128) % n) as f64;
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r / self.n() as f64)
    }

    /// Atom `j` for delay `d`.
    pub fn atom(&self, j: usize, d: usize) -> Vec<Complex64> {
        let phase = symmetric_phase(j, d, self.n()).conj();
        self.mask
            .indices
            .iter()
            .map(|&row| self.plain_atom_entry(j, row) * phase)
            .collect()
    }

    /// `A` applied to every column of a CA matrix.
    pub fn apply(&self, ca: &CycleAutocorrelationMatrix) -> Result<DelayProductMatrix> {
        let n = self.n();
        if ca.n() != n {
            return Err(Error::shape(format!("{n} CA rows"), ca.n()));
        }
        let columns = ca
            .columns
            .iter()
            .zip(&ca.delays)
            .map(|(col, &d)| {
                let mut buf: Vec<Complex64> = col
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * symmetric_phase(k, d, n).conj())
                    .collect();
                dft::inverse(&mut buf);
                self.mask.indices.iter().map(|&i| buf[i]).collect()
            })
            .collect();
        Ok(DelayProductMatrix {
            columns,
            delays: ca.delays.clone(),
        })
    }

    /// `r^H A_d`: correlation of a length-`M` residual with every atom.
    pub fn correlate(&self, residual: &[Complex64], d: usize) -> Result<Vec<Complex64>> {
        if residual.len() != self.m() {
            return Err(Error::shape(self.m(), residual.len()));
        }
        let n = self.n();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (&row, r) in self.mask.indices.iter().zip(residual) {
            buf[row] = r.conj();
        }
        dft::inverse(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= symmetric_phase(k, d, n).conj();
        }
        Ok(buf)
    }

    /// Magnitudes `|r^H A_d|`, which do not depend on the delay phase.
    pub fn correlation_magnitudes(&self, residual: &[Complex64]) -> Result<Vec<f64>> {
        if residual.len() != self.m() {
            return Err(Error::shape(self.m(), residual.len()));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n()];
        for (&row, r) in self.mask.indices.iter().zip(residual) {
            buf[row] = r.conj();
        }
        dft::inverse(&mut buf);
        Ok(buf.iter().map(|v| v.norm()).collect())
    }

    /// Support-restricted atom matrix without the delay phase.
    pub(crate) fn plain_atoms(&self, support: &[usize]) -> DMatrix<Complex64> {
        let m = self.m();
        DMatrix::from_fn(m, support.len(), |i, c| {
            self.plain_atom_entry(support[c], self.mask.indices[i])
        })
    }

    /// Solves `min || p - A_d z ||` with `supp z` inside `support`, for each column.
    pub(crate) fn fit_support(
        &self,
        p_u: &DelayProductMatrix,
        support: &[usize],
    ) -> Result<Vec<SupportFit>> {
        if p_u.rows() != self.m() {
            return Err(Error::shape(format!("{} measurement rows", self.m()), p_u.rows()));
        }
        let atoms = self.plain_atoms(support);
        let solver = LeastSquares::new(&atoms);
        p_u.columns
            .iter()
            .zip(&p_u.delays)
            .map(|(col, &d)| {
                let b = DVector::from_column_slice(col);
                let z = solver.solve(&b);
                let residual = (&b - &atoms * &z).iter().copied().collect();
                let coefficients = support
                    .iter()
                    .zip(z.iter())
                    .map(|(&k, v)| v * symmetric_phase(k, d, self.n()))
                    .collect();
                Ok(SupportFit {
                    coefficients,
                    residual,
                    rank_deficient: solver.rank_deficient,
                })
            })
            .collect()
    }
}

/// QR least squares with a minimum-norm SVD fallback for rank-deficient systems.
struct LeastSquares {
    qr: Option<nalgebra::linalg::QR<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
    svd: Option<nalgebra::linalg::SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
    rank_deficient: bool,
    cols: usize,
}

const RANK_TOL: f64 = 1e-10;

impl LeastSquares {
    fn new(a: &DMatrix<Complex64>) -> Self {
        let cols = a.ncols();
        if cols == 0 {
            return Self { qr: None, svd: None, rank_deficient: false, cols };
        }
        if a.nrows() >= cols {
            let qr = a.clone().qr();
            let diag: Vec<f64> = qr.r().diagonal().iter().map(|v| v.norm()).collect();
            let max = diag.iter().cloned().fold(0.0, f64::max);
            if diag.iter().all(|&v| v > RANK_TOL * max.max(f64::MIN_POSITIVE)) {
                return Self { qr: Some(qr), svd: None, rank_deficient: false, cols };
            }
        }
        let svd = a.clone().svd(true, true);
        Self { qr: None, svd: Some(svd), rank_deficient: true, cols }
    }

    fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        if let Some(qr) = &self.qr {
            let qtb = qr.q().adjoint() * b;
            let r = qr.r();
            let mut z = DVector::from_element(self.cols, Complex64::new(0.0, 0.0));
            for i in (0..self.cols).rev() {
                let mut acc = qtb[i];
                for j in i + 1..self.cols {
                    acc -= r[(i, j)] * z[j];
                }
                z[i] = acc / r[(i, i)];
            }
            z
        } else if let Some(svd) = &self.svd {
            let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            svd.solve(b, RANK_TOL * max)
                .unwrap_or_else(|_| DVector::from_element(self.cols, Complex64::new(0.0, 0.0)))
        } else {
            DVector::from_element(0, Complex64::new(0.0, 0.0))
        }
    }
}
