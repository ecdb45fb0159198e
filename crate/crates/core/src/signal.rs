//! Test signal synthesis: rectangular-pulse BPSK and circular complex AWGN.
//!
//! Samples are taken at `t = i * Ts` from `sum_m a_m q(t - m*Nsym*Ts + phi)`,
//! where `q` is a rectangular pulse `Nsym` samples wide centered at zero and
//! `phi = d_phi * Ts`. With the default `d_phi = (Nsym + 1) / 2` the first
//! symbol boundary falls half a sample before index 0, so every sample sits
//! strictly inside a pulse and symbol blocks align with index multiples of
//! `Nsym`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
}

/// Linearly modulated signal with a rectangular pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// Samples per symbol.
    pub n_sym: usize,
    /// Pulse-timing phase in samples.
    pub d_phi: f64,
    /// Average symbol power.
    pub sigma_a2: f64,
    pub modulation: Modulation,
}

impl SignalModel {
    /// Unit-power BPSK with the default timing phase `(n_sym + 1) / 2`.
    pub fn bpsk(n_sym: usize) -> Self {
        Self {
            n_sym,
            d_phi: (n_sym as f64 + 1.0) / 2.0,
            sigma_a2: 1.0,
            modulation: Modulation::Bpsk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sym == 0 {
            return Err(Error::config("symbol length must be at least 1"));
        }
        if !(self.sigma_a2 > 0.0 && self.sigma_a2.is_finite()) {
            return Err(Error::config("symbol power must be positive and finite"));
        }
        if !self.d_phi.is_finite() {
            return Err(Error::config("timing phase must be finite"));
        }
        Ok(())
    }

    /// Index of the symbol whose pulse covers sample `i`.
    fn symbol_index(&self, i: usize) -> i64 {
        let n_sym = self.n_sym as f64;
        ((i as f64 + self.d_phi + n_sym / 2.0) / n_sym).floor() as i64
    }

    /// Fundamental discrete cycle frequency for a CA of size `n`, if it is a bin center.
    pub fn fundamental_bin(&self, n: usize) -> Option<usize> {
        (self.n_sym > 0 && n.is_multiple_of(self.n_sym)).then(|| n / self.n_sym)
    }
}

/// A block of complex baseband samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub samples: Vec<Complex64>,
    /// Sampling period in seconds (informational only).
    pub sample_period: f64,
    pub seed: u64,
}

impl SampleRecord {
    pub fn new(samples: Vec<Complex64>, seed: u64) -> Self {
        Self {
            samples,
            sample_period: 1.0,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Empirical mean power `(1/N) sum |x|^2`.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Returns a copy scaled by a real factor.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            ..self.clone()
        }
    }

    /// Leading `n` samples.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.samples.len() {
            return Err(Error::shape(
                format!("at most {} samples", self.samples.len()),
                n,
            ));
        }
        Ok(Self {
            samples: self.samples[..n].to_vec(),
            ..self.clone()
        })
    }
}

fn check_length(model: &SignalModel, n: usize) -> Result<()> {
    model.validate()?;
    if n < model.n_sym || !n.is_multiple_of(model.n_sym) {
        return Err(Error::config(format!(
            "block length {n} must be a positive multiple of the symbol length {}",
            model.n_sym
        )));
    }
    Ok(())
}

/// Generates `n` samples of the modulated signal with symbols drawn i.i.d. from `{+1, -1}`.
pub fn generate_signal(model: &SignalModel, n: usize, seed: u64) -> Result<SampleRecord> {
    check_length(model, n)?;
    let first = model.symbol_index(0);
    let last = model.symbol_index(n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols: Vec<f64> = (first..=last)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut record = synthesize(model, n, first, &symbols)?;
    record.seed = seed;
    Ok(record)
}

/// Generates `n` samples from an explicit symbol sequence.
///
/// `symbols[0]` is the symbol covering sample 0; the sequence must cover the whole block.
pub fn generate_signal_with_symbols(
    model: &SignalModel,
    n: usize,
    symbols: &[f64],
) -> Result<SampleRecord> {
    check_length(model, n)?;
    synthesize(model, n, model.symbol_index(0), symbols)
}

fn synthesize(model: &SignalModel, n: usize, first: i64, symbols: &[f64]) -> Result<SampleRecord> {
    let needed = (model.symbol_index(n - 1) - first + 1) as usize;
    if symbols.len() < needed {
        return Err(Error::config(format!(
            "{needed} symbols required, {} given",
            symbols.len()
        )));
    }
    let amp = model.sigma_a2.sqrt();
    let samples = (0..n)
        .map(|i| {
            let m = (model.symbol_index(i) - first) as usize;
            Complex64::new(amp * symbols[m], 0.0)
        })
        .collect();
    Ok(SampleRecord::new(samples, 0))
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Adds circular complex Gaussian noise at `snr_db` relative to the record's empirical power.
///
/// `snr_db = +inf` disables the noise and returns the input unchanged.
pub fn add_awgn(record: &SampleRecord, snr_db: f64, seed: u64) -> Result<SampleRecord> {
    if snr_db == f64::INFINITY {
        return Ok(record.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::domain(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    let noise_power = record.mean_power() * 10f64.powf(-snr_db / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = record
        .samples
        .iter()
        .map(|&s| s + complex_gaussian(&mut rng, noise_power))
        .collect();
    Ok(SampleRecord {
        samples,
        sample_period: record.sample_period,
        seed: record.seed,
    })
}

/// Pure noise block (hypothesis H0).
pub fn generate_h0(n: usize, noise_power: f64, seed: u64) -> Result<SampleRecord> {
    if n == 0 {
        return Err(Error::config("block length must be positive"));
    }
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(Error::domain("noise power must be positive and finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| complex_gaussian(&mut rng, noise_power))
        .collect();
    Ok(SampleRecord::new(samples, seed))
}

/// Sidecar header written next to binary IQ files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqHeader {
    pub n: usize,
    pub sample_rate: f64,
}

/// Path of the JSON sidecar belonging to a binary IQ file (`<file>.json`).
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Writes little-endian interleaved f32 `(re, im)` pairs plus the JSON sidecar.
pub fn write_iq_f32(path: &Path, record: &SampleRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in &record.samples {
        w.write_all(&(s.re as f32).to_le_bytes())?;
        w.write_all(&(s.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    let header = IqHeader {
        n: record.len(),
        sample_rate: 1.0 / record.sample_period,
    };
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Reads a binary IQ file. The sidecar header is used when present.
pub fn read_iq_f32(path: &Path) -> Result<SampleRecord> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!(
            "{}: length {} is not a multiple of 8 bytes",
            path.display(),
            bytes.len()
        )));
    }
    let samples: Vec<Complex64> = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let mut record = SampleRecord::new(samples, 0);
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let header: IqHeader = serde_json::from_str(&std::fs::read_to_string(&sidecar)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", sidecar.display())))?;
        if header.n != record.len() {
            return Err(Error::Parse(format!(
                "sidecar announces {} samples, file holds {}",
                header.n,
                record.len()
            )));
        }
        if header.sample_rate > 0.0 {
            record.sample_period = 1.0 / header.sample_rate;
        }
    }
    Ok(record)
}

/// Writes CSV with columns `index,re,im`.
pub fn write_iq_csv(path: &Path, record: &SampleRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,re,im")?;
    for (i, s) in record.samples.iter().enumerate() {
        writeln!(w, "{i},{},{}", s.re, s.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_iq_csv(path: &Path) -> Result<SampleRecord> {
    let reader = BufReader::new(File::open(path)?);
    let mut samples = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (line_no == 0 && line.starts_with("index")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected index,re,im", line_no + 1)));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))
        };
        let index = fields[0]
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))?;
        if index != samples.len() {
            return Err(Error::Parse(format!(
                "line {}: index {index} out of sequence",
                line_no + 1
            )));
        }
        samples.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
    }
    Ok(SampleRecord::new(samples, 0))
}
