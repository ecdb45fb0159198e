use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::caf::SensingConfig;
use crate::error::{Error, Result};
use crate::signal::SignalModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClassicOracle,
    Omp,
    Sober,
    HadesSym,
    HadesAsy,
    SoberOracle,
    HadesOracle,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::ClassicOracle,
        Method::Omp,
        Method::Sober,
        Method::HadesSym,
        Method::HadesAsy,
        Method::SoberOracle,
        Method::HadesOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ClassicOracle => "classic-oracle",
            Method::Omp => "omp",
            Method::Sober => "sober",
            Method::HadesSym => "hades-sym",
            Method::HadesAsy => "hades-asy",
            Method::SoberOracle => "sober-oracle",
            Method::HadesOracle => "hades-oracle",
        }
    }

    /// Whether the method works on the compressive measurements (and so depends on `c_r`).
    pub fn is_sparse(self) -> bool {
        self != Method::ClassicOracle
    }

    /// Whether the method is told the true cycle frequencies.
    pub fn is_oracle(self) -> bool {
        matches!(self, Method::ClassicOracle | Method::SoberOracle | Method::HadesOracle)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::config(format!("unknown method '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// Experiment description as read from a config file. Every key is optional
/// and falls back to the full-scale defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub schema_version: u32,
    /// CA size of the compressive methods.
    pub n: usize,
    /// Known delay-product elements, also the classical CA size.
    pub m: usize,
    pub delays: Vec<usize>,
    pub n_sym: usize,
    pub snr_db: Vec<f64>,
    pub pfa: Vec<f64>,
    pub c_r: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    pub window_len: usize,
    pub kaiser_alpha: f64,
    /// Consecutive sample ratio for the support and MSE families.
    pub fixed_c_r: f64,
    pub somp_iters: usize,
    pub hades_iters: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: 4000,
            m: 1000,
            delays: vec![1, 2, 3, 4],
            n_sym: 8,
            snr_db: vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0],
            pfa: vec![0.01, 0.03, 0.05, 0.1],
            c_r: vec![0.01, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5],
            methods: Method::ALL.to_vec(),
            trials: 500,
            seed: 1,
            window_len: 201,
            kaiser_alpha: 10.0,
            fixed_c_r: 0.15,
            somp_iters: 8,
            hades_iters: 2,
        }
    }
}

impl ExperimentPlan {
    /// Reduced sizes for quick runs.
    pub fn fast() -> Self {
        Self {
            n: 1000,
            m: 250,
            n_sym: 10,
            snr_db: vec![-4.0, -2.0, 0.0, 2.0, 4.0],
            c_r: vec![0.05, 0.15, 0.3, 0.5],
            trials: 200,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn model(&self) -> SignalModel {
        SignalModel::bpsk(self.n_sym)
    }

    pub fn sensing(&self, c_r: f64) -> SensingConfig {
        SensingConfig {
            n: self.n,
            m_avail: self.m,
            delays: self.delays.clone(),
            c_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.snr_db.is_empty() || self.pfa.is_empty() || self.c_r.is_empty() || self.methods.is_empty() {
            return Err(Error::config("snr_db, pfa, c_r and methods must be non-empty"));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::config("SNR values must be finite or +inf"));
        }
        if let Some(p) = self.pfa.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::config(format!("pfa {p} outside (0, 1)")));
        }
        for &c in self.c_r.iter().chain([&self.fixed_c_r]) {
            self.sensing(c).validate()?;
        }
        self.model().validate()?;
        for size in [self.n, self.m] {
            if size % self.n_sym != 0 {
                return Err(Error::config(format!(
                    "size {size} must be a multiple of N_sym = {}",
                    self.n_sym
                )));
            }
        }
        if self.window_len.is_multiple_of(2) || self.window_len >= self.m {
            return Err(Error::config(format!(
                "window_len {} must be odd and below M = {}",
                self.window_len, self.m
            )));
        }
        if self.somp_iters == 0 || self.hades_iters == 0 {
            return Err(Error::config("iteration counts must be positive"));
        }
        Ok(())
    }

    /// Grid value closest to `target`.
    pub fn nearest(grid: &[f64], target: f64) -> usize {
        let mut best = 0;
        for (i, v) in grid.iter().enumerate() {
            if (v - target).abs() < (grid[best] - target).abs() {
                best = i;
            }
        }
        best
    }
}
