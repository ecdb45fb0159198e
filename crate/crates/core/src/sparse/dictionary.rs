use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::caf::{asymptotic_ca_general, wrapped_frequency};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DictionaryKind {
    Symmetry,
    Asymptotic,
}

/// Nonnegative `N x N/2` pattern matrix. Column `j - 1` describes the CA
/// rows implied by candidate cycle frequency `j` in `1..=N/2`; row 0 (DC) is
/// always empty.
///
/// Columns are stored sparsely as `(row, value)` pairs sorted by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDictionary {
    pub n: usize,
    pub kind: DictionaryKind,
    /// Delay the dictionary was built for; `None` when it serves every delay.
    pub delay: Option<usize>,
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl StructureDictionary {
    pub fn n_candidates(&self) -> usize {
        self.columns.len()
    }

    /// Word of candidate frequency `j` (1-based).
    pub fn word(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j - 1]
    }

    pub fn get(&self, row: usize, j: usize) -> f64 {
        self.word(j)
            .iter()
            .find(|(r, _)| *r == row)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.columns.len()]; self.n];
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                dense[r][c] = v;
            }
        }
        dense
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::config(format!(
            "dictionary size must be even and at least 4, got {n}"
        )));
    }
    Ok(())
}

/// Symmetry dictionary: column `j` marks rows `j` and `N - j`.
pub fn build_symmetry_dictionary(n: usize) -> Result<StructureDictionary> {
    check_size(n)?;
    let columns = (1..=n / 2)
        .map(|j| {
            if 2 * j == n {
                vec![(j, 1.0)]
            } else {
                vec![(j, 1.0), (n - j, 1.0)]
            }
        })
        .collect();
    Ok(StructureDictionary {
        n,
        kind: DictionaryKind::Symmetry,
        delay: None,
        columns,
    })
}

/// Asymptotic dictionary for delay `d`: column `j` is the magnitude of the
/// asymptotic CA for symbol length `N / j` with DC removed, normalized to unit
/// l1 norm. Candidates whose symbol length does not exceed `d` have no pulse
/// overlap at that delay and yield an empty column.
pub fn build_asymptotic_dictionary(n: usize, d: usize, sigma_a2: f64) -> Result<StructureDictionary> {
    check_size(n)?;
    if !(sigma_a2 > 0.0) {
        return Err(Error::config("symbol power must be positive"));
    }
    let columns = (1..=n / 2)
        .map(|j| {
            let sym_len = n as f64 / j as f64;
            let mut word: Vec<(usize, f64)> = Vec::new();
            for k in (j..=n / 2).step_by(j) {
                for row in [k, n - k] {
                    let f = wrapped_frequency(row, n);
                    let v = asymptotic_ca_general(f, d as i64, sym_len, 0.0, sigma_a2, n).norm();
                    word.push((row, v));
                }
            }
            word.sort_by_key(|&(k, _)| k);
            word.dedup_by_key(|e| e.0);
            let peak = word.iter().map(|&(_, v)| v).fold(0.0, f64::max);
            word.retain(|&(_, v)| v > 1e-12 * peak && v > 0.0);
            let l1: f64 = word.iter().map(|&(_, v)| v).sum();
            if l1 > 0.0 {
                for e in &mut word {
                    e.1 /= l1;
                }
            }
            word
        })
        .collect();
    Ok(StructureDictionary {
        n,
        kind: DictionaryKind::Asymptotic,
        delay: Some(d),
        columns,
    })
}

/// CSV export with columns `row,col,value`; `col` is the 1-based candidate frequency.
pub fn write_dictionary_csv(path: &Path, dict: &StructureDictionary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "row,col,value")?;
    for (c, col) in dict.columns.iter().enumerate() {
        for &(r, v) in col {
            writeln!(w, "{r},{},{v}", c + 1)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dictionary_csv(
    path: &Path,
    n: usize,
    kind: DictionaryKind,
    delay: Option<usize>,
) -> Result<StructureDictionary> {
    check_size(n)?;
    let mut columns = vec![Vec::new(); n / 2];
    let reader = BufReader::new(File::open(path)?);
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line_no == 0 && line.starts_with("row") || line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::Parse(format!("line {}: {m}", line_no + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(err("expected row,col,value".into()));
        }
        let row: usize = f[0].parse().map_err(|e| err(format!("{e}")))?;
        let col: usize = f[1].parse().map_err(|e| err(format!("{e}")))?;
        let value: f64 = f[2].parse().map_err(|e| err(format!("{e}")))?;
        if row >= n || col == 0 || col > n / 2 {
            return Err(err(format!("entry ({row}, {col}) outside {n}x{}", n / 2)));
        }
        if value < 0.0 {
            return Err(err("dictionary entries must be nonnegative".into()));
        }
        columns[col - 1].push((row, value));
    }
    for col in &mut columns {
        col.sort_by_key(|&(r, _)| r);
    }
    Ok(StructureDictionary {
        n,
        kind,
        delay,
        columns,
    })
}
