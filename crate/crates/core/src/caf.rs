//! Delay products, the classical cyclic autocorrelation estimator and the
//! closed-form asymptotic CA of sampled rectangular-pulse linear modulation.
//!
//! Frequency convention: row `k` of an `N`-row CA matrix is the discrete cycle
//! frequency `k` for `k <= N/2` and `k - N` for `k > N/2`. The estimator
//! carries the symmetric-CA phase `exp(-j pi k d / N)` evaluated at the
//! wrapped frequency, so both estimation paths and the measurement operator
//! share one definition.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{Error, Result};
use crate::signal::{SampleRecord, SignalModel};

/// Sizes of the compressive acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig {
    /// CA size `N`.
    pub n: usize,
    /// Number of known delay-product elements `M`.
    pub m_avail: usize,
    /// Discrete delays, strictly positive and distinct.
    pub delays: Vec<usize>,
    /// Consecutive sample ratio.
    pub c_r: f64,
}

impl SensingConfig {
    pub const C_R_MIN: f64 = 0.01;
    pub const C_R_MAX: f64 = 0.5;

    pub fn validate(&self) -> Result<()> {
        if self.m_avail == 0 || self.m_avail > self.n {
            return Err(Error::config(format!(
                "known element count M = {} must lie in 1..={}",
                self.m_avail, self.n
            )));
        }
        check_delays(&self.delays, self.n)?;
        if self.delays.contains(&0) {
            return Err(Error::config("delays must be strictly positive"));
        }
        if !(Self::C_R_MIN..=Self::C_R_MAX).contains(&self.c_r) {
            return Err(Error::config(format!(
                "consecutive sample ratio {} outside [{}, {}]",
                self.c_r,
                Self::C_R_MIN,
                Self::C_R_MAX
            )));
        }
        Ok(())
    }

    /// `ceil(c_r * M)`, the length of the consecutive prefix.
    pub fn consecutive_count(&self) -> usize {
        consecutive_count(self.c_r, self.m_avail)
    }
}

/// `ceil(c_r * m)` with a guard against representation error (0.15 * 1000 is 150, not 151).
pub fn consecutive_count(c_r: f64, m: usize) -> usize {
    let x = c_r * m as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

fn check_delays(delays: &[usize], n: usize) -> Result<()> {
    if delays.is_empty() {
        return Err(Error::config("at least one delay is required"));
    }
    for (i, &d) in delays.iter().enumerate() {
        if d >= n {
            return Err(Error::domain(format!("delay {d} must be below N = {n}")));
        }
        if delays[..i].contains(&d) {
            return Err(Error::config(format!("delay {d} listed twice")));
        }
    }
    Ok(())
}

/// Delay products, one column per delay.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayProductMatrix {
    pub columns: Vec<Vec<Complex64>>,
    pub delays: Vec<usize>,
}

impl DelayProductMatrix {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_delays(&self) -> usize {
        self.delays.len()
    }

    pub fn zeros(rows: usize, delays: &[usize]) -> Self {
        Self {
            columns: vec![vec![Complex64::new(0.0, 0.0); rows]; delays.len()],
            delays: delays.to_vec(),
        }
    }

    pub fn scale(&mut self, gain: f64) {
        for col in &mut self.columns {
            for v in col {
                *v *= gain;
            }
        }
    }
}

/// CA estimate over all `N` discrete cycle frequencies and a set of delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleAutocorrelationMatrix {
    /// Column `l` holds the CA vector for `delays[l]`.
    pub columns: Vec<Vec<Complex64>>,
    pub delays: Vec<usize>,
}

impl CycleAutocorrelationMatrix {
    pub fn zeros(n: usize, delays: &[usize]) -> Self {
        Self {
            columns: vec![vec![Complex64::new(0.0, 0.0); n]; delays.len()],
            delays: delays.to_vec(),
        }
    }

    /// Number of cycle-frequency rows `N`.
    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_delays(&self) -> usize {
        self.delays.len()
    }

    /// Entry at row `k` (taken modulo `N`, negative allowed) and delay index `l`.
    pub fn at(&self, k: i64, l: usize) -> Complex64 {
        let n = self.n() as i64;
        self.columns[l][k.rem_euclid(n) as usize]
    }

    /// Row `k` across all delays.
    pub fn row(&self, k: usize) -> Vec<Complex64> {
        self.columns.iter().map(|c| c[k]).collect()
    }

    /// Squared Frobenius distance to another matrix of the same shape.
    pub fn frobenius_dist_sqr(&self, other: &Self) -> Result<f64> {
        if self.n() != other.n() || self.n_delays() != other.n_delays() {
            return Err(Error::shape(
                format!("{}x{}", self.n(), self.n_delays()),
                format!("{}x{}", other.n(), other.n_delays()),
            ));
        }
        Ok(self
            .columns
            .iter()
            .zip(&other.columns)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()))
            .sum())
    }
}

/// Frequency of row `k` in `[-N/2 + 1, N/2]`.
pub fn wrapped_frequency(k: usize, n: usize) -> i64 {
    if 2 * k <= n {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Symmetric-CA phase `exp(-j pi k~ d / N)` applied to row `k` of the estimator.
pub fn symmetric_phase(k: usize, d: usize, n: usize) -> Complex64 {
    let f = wrapped_frequency(k, n) as f64;
    Complex64::from_polar(1.0, -PI * f * d as f64 / n as f64)
}

/// `x[i] * conj(x[i + d])`, zero-padded in the last `d` entries.
pub fn delay_product(x: &SampleRecord, d: usize) -> Result<Vec<Complex64>> {
    let n = x.len();
    if d >= n {
        return Err(Error::domain(format!("delay {d} must be below N = {n}")));
    }
    let s = &x.samples;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n - d {
        out[i] = s[i] * s[i + d].conj();
    }
    Ok(out)
}

pub fn delay_product_matrix(x: &SampleRecord, delays: &[usize]) -> Result<DelayProductMatrix> {
    check_delays(delays, x.len())?;
    let columns = delays
        .iter()
        .map(|&d| delay_product(x, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayProductMatrix {
        columns,
        delays: delays.to_vec(),
    })
}

/// Classical (biased) CA estimator over the full record.
pub fn classical_ca(x: &SampleRecord, delays: &[usize]) -> Result<CycleAutocorrelationMatrix> {
    ca_matrix_from_products(&delay_product_matrix(x, delays)?)
}

/// `(1/N) F P` with the per-row symmetric phase.
pub fn ca_matrix_from_products(p: &DelayProductMatrix) -> Result<CycleAutocorrelationMatrix> {
    let n = p.rows();
    if n == 0 {
        return Err(Error::shape("N > 0 rows", 0));
    }
    check_delays(&p.delays, n)?;
    let scale = 1.0 / n as f64;
    let columns = p
        .columns
        .iter()
        .zip(&p.delays)
        .map(|(col, &d)| {
            if col.len() != n {
                return Err(Error::shape(n, col.len()));
            }
            let mut buf = col.clone();
            dft::forward(&mut buf);
            for (k, v) in buf.iter_mut().enumerate() {
                *v *= symmetric_phase(k, d, n) * scale;
            }
            Ok(buf)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CycleAutocorrelationMatrix {
        columns,
        delays: p.delays.clone(),
    })
}

/// Asymptotic CA for a possibly fractional symbol length.
///
/// Nonzero only at DC and at integer multiples of `N / sym_len`; zero for
/// `|d| >= sym_len` where the rectangular pulse products no longer overlap.
pub fn asymptotic_ca_general(
    k: i64,
    d: i64,
    sym_len: f64,
    d_phi: f64,
    sigma_a2: f64,
    n: usize,
) -> Complex64 {
    let dabs = d.unsigned_abs() as f64;
    if dabs >= sym_len {
        return Complex64::new(0.0, 0.0);
    }
    if k == 0 {
        return Complex64::new(sigma_a2 * (sym_len - dabs) / sym_len, 0.0);
    }
    let ratio = k as f64 * sym_len / n as f64;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.abs().max(1.0) {
        return Complex64::new(0.0, 0.0);
    }
    let f = k as f64 / n as f64;
    let mag = sigma_a2 / sym_len * (PI * f * (sym_len - dabs)).sin() / (PI * f).sin();
    Complex64::from_polar(1.0, 2.0 * PI * f * d_phi) * mag
}

fn check_asymptotic(d: i64, model: &SignalModel, n: usize) -> Result<()> {
    model.validate()?;
    if d.unsigned_abs() as usize > model.n_sym {
        return Err(Error::domain(format!(
            "closed form requires |d| <= N_sym = {}, got {d}",
            model.n_sym
        )));
    }
    if n == 0 || !n.is_multiple_of(model.n_sym) {
        return Err(Error::config(format!(
            "CA size {n} must be a multiple of N_sym = {}",
            model.n_sym
        )));
    }
    Ok(())
}

/// Closed-form asymptotic CA of the sampled signal at discrete cycle frequency `k`.
pub fn asymptotic_ca(k: i64, d: i64, model: &SignalModel, n: usize) -> Result<Complex64> {
    check_asymptotic(d, model, n)?;
    Ok(asymptotic_ca_general(
        k,
        d,
        model.n_sym as f64,
        model.d_phi,
        model.sigma_a2,
        n,
    ))
}

/// Asymptotic CA column for delay `d` in DFT row order.
pub fn asymptotic_ca_vector(model: &SignalModel, n: usize, d: i64) -> Result<Vec<Complex64>> {
    check_asymptotic(d, model, n)?;
    Ok((0..n)
        .map(|k| {
            asymptotic_ca_general(
                wrapped_frequency(k, n),
                d,
                model.n_sym as f64,
                model.d_phi,
                model.sigma_a2,
                n,
            )
        })
        .collect())
}

/// Asymptotic CA matrix over a delay set, the reference for estimation error.
pub fn asymptotic_ca_matrix(
    model: &SignalModel,
    n: usize,
    delays: &[usize],
) -> Result<CycleAutocorrelationMatrix> {
    let columns = delays
        .iter()
        .map(|&d| asymptotic_ca_vector(model, n, d as i64))
        .collect::<Result<Vec<_>>>()?;
    Ok(CycleAutocorrelationMatrix {
        columns,
        delays: delays.to_vec(),
    })
}

/// Rows that carry a cycle frequency of the model (harmonics, DC excluded).
pub fn harmonic_rows(model: &SignalModel, n: usize) -> Result<Vec<usize>> {
    let fund = model
        .fundamental_bin(n)
        .ok_or_else(|| Error::config(format!("N = {n} not a multiple of N_sym = {}", model.n_sym)))?;
    Ok((1..model.n_sym).map(|m| m * fund).collect())
}

/// `|sum_{l=-L..L} (-1)^l / (k/N + l) - pi / sin(pi k / N)|`.
///
/// The series is summed in symmetric pairs from the tail inward to limit
/// cancellation error.
pub fn verify_series_identity(k: usize, n: usize, terms: usize) -> Result<f64> {
    if n == 0 || k.is_multiple_of(n) {
        return Err(Error::domain(format!("k/N = {k}/{n} is an integer")));
    }
    if terms < 1000 {
        return Err(Error::config("at least 1000 terms are required"));
    }
    let a = k as f64 / n as f64;
    let mut sum = 0.0;
    for l in (1..=terms).rev() {
        let lf = l as f64;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * 2.0 * a / (a * a - lf * lf);
    }
    sum += 1.0 / a;
    Ok((sum - PI / (PI * a).sin()).abs())
}

/// CSV export with columns `k,d,re,im`.
pub fn write_ca_csv(path: &Path, ca: &CycleAutocorrelationMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,d,re,im")?;
    for k in 0..ca.n() {
        for (l, &d) in ca.delays.iter().enumerate() {
            let v = ca.columns[l][k];
            writeln!(w, "{k},{d},{},{}", v.re, v.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Binary dump: little-endian `u32 N`, `u32 M_d`, `M_d x u32` delays, then the
/// matrix row-major as `f32 (re, im)` pairs.
pub fn write_ca_binary(path: &Path, ca: &CycleAutocorrelationMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(ca.n() as u32).to_le_bytes())?;
    w.write_all(&(ca.n_delays() as u32).to_le_bytes())?;
    for &d in &ca.delays {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for k in 0..ca.n() {
        for col in &ca.columns {
            w.write_all(&(col[k].re as f32).to_le_bytes())?;
            w.write_all(&(col[k].im as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_ca_binary(path: &Path) -> Result<CycleAutocorrelationMatrix> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::Parse("truncated CA dump".into()))
    };
    let n = word(0)? as usize;
    let md = word(1)? as usize;
    let delays = (0..md).map(|i| word(2 + i).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let body = 4 * (2 + md);
    if bytes.len() != body + 8 * n * md {
        return Err(Error::Parse(format!(
            "CA dump holds {} bytes, header implies {}",
            bytes.len(),
            body + 8 * n * md
        )));
    }
    let mut ca = CycleAutocorrelationMatrix::zeros(n, &delays);
    for k in 0..n {
        for l in 0..md {
            let off = body + 8 * (k * md + l);
            let f = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
            ca.columns[l][k] = Complex64::new(f(off) as f64, f(off + 4) as f64);
        }
    }
    Ok(ca)
}
