use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::metrics::{alarm_rate, pfa_required, recovery_summary, MetricRecord, TrialSummary};
use super::plan::{ExperimentPlan, Method};
use super::trial::{Input, Pipeline};

type PointKey = (Method, u64, u64);

/// All trial summaries of a sweep, keyed by method and grid point.
pub struct SweepResults {
    pub plan: ExperimentPlan,
    h1: BTreeMap<PointKey, Vec<TrialSummary>>,
    h0: BTreeMap<(Method, u64), Vec<TrialSummary>>,
}

fn c_key(method: Method, c_r: f64) -> u64 {
    if method.is_sparse() {
        c_r.to_bits()
    } else {
        0
    }
}

/// Runs `trials` trials of one configuration in parallel, ordered by trial index.
pub fn run_point(pipe: &Pipeline, method: Method, input: Input, c_r: f64, trials: usize) -> Vec<TrialSummary> {
    let dof = 2 * pipe.plan.delays.len();
    (0..trials as u64)
        .into_par_iter()
        .map(|t| match pipe.run_trial(method, input, c_r, t) {
            Ok(o) => o.into(),
            Err(_) => TrialSummary::failure(dof),
        })
        .collect()
}

/// Runs every method over the SNR and `c_r` grids (plus `fixed_c_r`), H0 once per `c_r`.
pub fn run_sweep(plan: &ExperimentPlan, progress: &(dyn Fn(&str) + Sync)) -> Result<SweepResults> {
    let pipe = Pipeline::new(plan)?;
    let mut c_values = plan.c_r.clone();
    if !c_values.contains(&plan.fixed_c_r) {
        c_values.push(plan.fixed_c_r);
    }
    let mut h1 = BTreeMap::new();
    let mut h0 = BTreeMap::new();
    for &method in &plan.methods {
        let cs: &[f64] = if method.is_sparse() { &c_values } else { &c_values[..1] };
        for &c_r in cs {
            progress(&format!("{method} c_r={c_r} H0"));
            h0.insert((method, c_key(method, c_r)), run_point(&pipe, method, Input::H0, c_r, plan.trials));
            for &snr_db in &plan.snr_db {
                progress(&format!("{method} c_r={c_r} snr={snr_db} dB"));
                let trials = run_point(&pipe, method, Input::H1 { snr_db }, c_r, plan.trials);
                h1.insert((method, c_key(method, c_r), snr_db.to_bits()), trials);
            }
        }
    }
    Ok(SweepResults { plan: plan.clone(), h1, h0 })
}

impl SweepResults {
    pub fn h1(&self, method: Method, c_r: f64, snr_db: f64) -> Option<&[TrialSummary]> {
        self.h1
            .get(&(method, c_key(method, c_r), snr_db.to_bits()))
            .map(Vec::as_slice)
    }

    pub fn h0(&self, method: Method, c_r: f64) -> Option<&[TrialSummary]> {
        self.h0.get(&(method, c_key(method, c_r))).map(Vec::as_slice)
    }

    fn pd_record(&self, method: Method, c_r: f64, snr_db: f64, pfa: f64) -> Result<MetricRecord> {
        let h1 = self.h1(method, c_r, snr_db).ok_or_else(|| Error::config("grid point not simulated"))?;
        let h0 = self.h0(method, c_r).ok_or_else(|| Error::config("grid point not simulated"))?;
        Ok(MetricRecord {
            snr_db: Some(snr_db),
            pfa_nominal: Some(pfa),
            c_r: method.is_sparse().then_some(c_r),
            pd: Some(alarm_rate(h1, pfa)?),
            pfa_empirical: Some(alarm_rate(h0, pfa)?),
            ..MetricRecord::empty(method, h1)
        })
    }

    /// Detection rate over `c_r` at the SNR closest to 0 dB.
    pub fn detection_rate_vs_cr(&self) -> Result<Vec<MetricRecord>> {
        let p = &self.plan;
        let snr = p.snr_db[ExperimentPlan::nearest(&p.snr_db, 0.0)];
        let mut out = Vec::new();
        for &method in &p.methods {
            for &c_r in &p.c_r {
                for &pfa in &p.pfa {
                    out.push(self.pd_record(method, c_r, snr, pfa)?);
                }
            }
        }
        Ok(out)
    }

    /// Detection rate over SNR at the best `c_r` of each method, SNR and pfa.
    pub fn max_detection_rate(&self) -> Result<Vec<MetricRecord>> {
        let p = &self.plan;
        let mut out = Vec::new();
        for &method in &p.methods {
            for &snr in &p.snr_db {
                for &pfa in &p.pfa {
                    let mut best: Option<MetricRecord> = None;
                    for &c_r in &p.c_r {
                        let r = self.pd_record(method, c_r, snr, pfa)?;
                        if best.as_ref().is_none_or(|b| r.pd > b.pd) {
                            best = Some(r);
                        }
                    }
                    out.extend(best);
                }
            }
        }
        Ok(out)
    }

    /// Empirical false-alarm rate and the nominal setting required to hit each target.
    pub fn pfa_calibration(&self) -> Result<Vec<MetricRecord>> {
        let p = &self.plan;
        let mut out = Vec::new();
        for &method in &p.methods {
            let cs: &[f64] = if method.is_sparse() { &p.c_r } else { &p.c_r[..1] };
            for &c_r in cs {
                let h0 = self.h0(method, c_r).ok_or_else(|| Error::config("grid point not simulated"))?;
                for &pfa in &p.pfa {
                    out.push(MetricRecord {
                        pfa_nominal: Some(pfa),
                        c_r: method.is_sparse().then_some(c_r),
                        pfa_empirical: Some(alarm_rate(h0, pfa)?),
                        pfa_required: Some(pfa_required(h0, pfa)),
                        ..MetricRecord::empty(method, h0)
                    });
                }
            }
        }
        Ok(out)
    }

    fn recovery_family(&self, keep: fn(MetricRecord) -> MetricRecord) -> Result<Vec<MetricRecord>> {
        let p = &self.plan;
        let mut out = Vec::new();
        for &method in &p.methods {
            for &snr in &p.snr_db {
                let h1 = self
                    .h1(method, p.fixed_c_r, snr)
                    .ok_or_else(|| Error::config("grid point not simulated"))?;
                let r = recovery_summary(method, h1);
                out.push(keep(MetricRecord {
                    snr_db: Some(snr),
                    c_r: method.is_sparse().then_some(p.fixed_c_r),
                    ..r
                }));
            }
        }
        Ok(out)
    }

    /// Hitrate and absolute index error over SNR at `fixed_c_r`.
    pub fn support_metrics(&self) -> Result<Vec<MetricRecord>> {
        self.recovery_family(|r| MetricRecord { mse_overall: None, mse_spikes: None, ..r })
    }

    /// CA estimation error over SNR at `fixed_c_r`.
    pub fn mse_metrics(&self) -> Result<Vec<MetricRecord>> {
        self.recovery_family(|r| MetricRecord {
            hitrate: None,
            full_support_hitrate: None,
            mean_abs_index_error: None,
            ..r
        })
    }

    /// Writes one CSV per figure family and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        fs::create_dir_all(dir)?;
        let families: [(&str, &str, Vec<MetricRecord>); 5] = [
            ("fig1_pd_vs_cr.csv", "detection rate over c_r near 0 dB", self.detection_rate_vs_cr()?),
            ("fig2_max_pd_vs_snr.csv", "best detection rate over c_r, per SNR", self.max_detection_rate()?),
            ("fig3_pfa_calibration.csv", "empirical vs nominal false-alarm rate", self.pfa_calibration()?),
            ("fig4_support.csv", "hitrate and absolute index error", self.support_metrics()?),
            ("fig5_mse.csv", "CA mean squared error", self.mse_metrics()?),
        ];
        let mut files = Vec::new();
        for (name, description, records) in families {
            let path = dir.join(name);
            write_csv(&path, &records)?;
            files.push(ManifestFile {
                name: name.to_string(),
                description: description.to_string(),
                columns: MetricRecord::COLUMNS.iter().map(|c| c.to_string()).collect(),
                rows: records.len(),
            });
        }
        let manifest = Manifest {
            version: format!("v{}", env!("CARGO_PKG_VERSION")),
            seed: self.plan.seed,
            config_hash: config_hash(&self.plan)?,
            trials: self.plan.trials,
            files,
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(manifest)
    }
}

pub fn write_csv(path: &PathBuf, records: &[MetricRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    if records.is_empty() {
        w.write_record(MetricRecord::COLUMNS).map_err(|e| Error::Parse(e.to_string()))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 of the normalized plan.
pub fn config_hash(plan: &ExperimentPlan) -> Result<String> {
    let digest = Sha256::digest(plan.to_toml()?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub description: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub trials: usize,
    pub files: Vec<ManifestFile>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentPlan {
        ExperimentPlan {
            n: 256,
            m: 128,
            n_sym: 8,
            window_len: 31,
            snr_db: vec![0.0, 4.0],
            c_r: vec![0.15, 0.3],
            pfa: vec![0.05, 0.1],
            methods: vec![Method::ClassicOracle, Method::HadesSym],
            trials: 6,
            ..ExperimentPlan::default()
        }
    }

    #[test]
    fn sweep_writes_five_families() {
        let res = run_sweep(&tiny(), &|_| {}).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = res.write(dir.path()).unwrap();
        assert_eq!(m.files.len(), 5);
        for f in &m.files {
            let text = fs::read_to_string(dir.path().join(&f.name)).unwrap();
            assert_eq!(text.lines().next().unwrap(), MetricRecord::COLUMNS.join(","));
            assert_eq!(text.lines().count(), f.rows + 1);
        }
        assert_eq!(m.config_hash.len(), 64);
        // classic: 2 pfa; hades: 2 c_r x 2 pfa
        assert_eq!(res.detection_rate_vs_cr().unwrap().len(), 2 * 2 + 2 * 2);
        assert_eq!(res.pfa_calibration().unwrap().len(), 2 + 4);
    }

    #[test]
    fn prefix_of_longer_sweep_is_unchanged() {
        let plan = tiny();
        let pipe = Pipeline::new(&plan).unwrap();
        let a = run_point(&pipe, Method::HadesSym, Input::H1 { snr_db: 0.0 }, 0.15, 4);
        let b = run_point(&pipe, Method::HadesSym, Input::H1 { snr_db: 0.0 }, 0.15, 8);
        assert_eq!(a[..], b[..4]);
    }
}
