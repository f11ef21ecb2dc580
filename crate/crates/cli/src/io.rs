//! File formats: JSON reports, trial states, CSV tables, and the binary
//! statevector and PEPS files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use gsprep_core::peps::{PepsState, SpinConfiguration};
use gsprep_core::sampler::SparseTrialState;
use gsprep_core::{Complex64, Statevector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialEntry {
    /// Spin of site 0 first; `1` is up.
    pub bits: String,
    pub re: f64,
    pub im: f64,
}

/// Serialized trial state with its sampling metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialFile {
    #[serde(rename = "M")]
    pub m: usize,
    pub sweeps: usize,
    pub acceptance_rate: f64,
    pub entries: Vec<TrialEntry>,
}

impl TrialFile {
    pub fn new(trial: &SparseTrialState, sweeps: usize, acceptance_rate: f64) -> Self {
        TrialFile {
            m: trial.m(),
            sweeps,
            acceptance_rate,
            entries: trial
                .entries()
                .iter()
                .map(|(c, a)| TrialEntry {
                    bits: c.to_string(),
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
    }

    pub fn to_trial(&self) -> CliResult<SparseTrialState> {
        if self.entries.len() != self.m {
            return Err(CliError::config(format!(
                "trial file declares M = {} but lists {} entries",
                self.m,
                self.entries.len()
            )));
        }
        let l = self
            .entries
            .first()
            .map(|e| e.bits.len())
            .ok_or_else(|| CliError::config("trial file has no entries"))?;
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let c: SpinConfiguration = e.bits.parse()?;
                Ok((c, Complex64::new(e.re, e.im)))
            })
            .collect::<gsprep_core::Result<Vec<_>>>()?;
        Ok(SparseTrialState::new(l, entries)?)
    }
}

/// A CSV table of numbers with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// `(x, y)` pairs from two named columns.
    pub fn pairs(&self, x: &str, y: &str) -> CliResult<Vec<(f64, f64)>> {
        let (Some(i), Some(j)) = (self.column(x), self.column(y)) else {
            return Err(CliError::config(format!(
                "table needs columns {x:?} and {y:?}, has {:?}",
                self.headers
            )));
        };
        Ok(self.rows.iter().map(|r| (r[i], r[j])).collect())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        self.write_to(file)
    }

    pub fn write_to<W: Write>(&self, w: W) -> CliResult<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.headers)?;
        for r in &self.rows {
            out.write_record(r.iter().map(|x| x.to_string()))?;
        }
        out.flush().map_err(|e| CliError::Csv(e.into()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| CliError::config(format!("{}: row {}: {v:?} is not a number", path.display(), line + 1)))
                })
                .collect::<CliResult<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { headers, rows })
    }
}

pub fn write_statevector(path: &Path, state: &Statevector) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    state.write_to(&mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_statevector(path: &Path) -> CliResult<Statevector> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(Statevector::read_from(BufReader::new(file))?)
}

pub fn write_peps(path: &Path, peps: &PepsState) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    peps.write_to(&mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_peps(path: &Path) -> CliResult<PepsState> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(PepsState::read_from(BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_file_round_trip() {
        let entries = vec![
            ("0110".parse().unwrap(), Complex64::new(0.6, 0.0)),
            ("1001".parse().unwrap(), Complex64::new(-0.8, 0.0)),
        ];
        let t = SparseTrialState::new(4, entries).unwrap();
        let f = TrialFile::new(&t, 1000, 0.25);
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.starts_with(r#"{"M":2,"sweeps":1000"#));
        assert!(text.contains(r#"{"bits":"1001","re":-0.8,"im":0.0}"#));
        let back: TrialFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_trial().unwrap(), t);
        let mut bad = f.clone();
        bad.m = 3;
        assert!(bad.to_trial().is_err());
    }

    #[test]
    fn table_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["M", "f1"]);
        t.rows.push(vec![1.0, 0.1 + 0.2]);
        t.rows.push(vec![2.0, 1e-17]);
        let p = dir.path().join("a.csv");
        t.write(&p).unwrap();
        let back = Table::read(&p).unwrap();
        assert_eq!(back, t);
        let q = dir.path().join("b.csv");
        back.write(&q).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
        assert_eq!(back.pairs("M", "f1").unwrap()[0], (1.0, 0.30000000000000004));
        assert!(back.pairs("L", "f1").is_err());
    }
}
