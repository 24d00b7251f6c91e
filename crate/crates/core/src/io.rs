//! File formats: numeric CSV tables, JSON records and run manifests with
//! SHA-256 digests.
//!
//! CSV files have one header row, comma separators and dot decimals;
//! numbers are written in shortest round-trip form.

use crate::error::{Error, Result};
use crate::nse2d::ModeSeries;
use crate::transport::DispersionCurve;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(&table.header).map_err(|e| csv_error(path, e))?;
    let mut buf = ryu::Buffer::new();
    for row in &table.rows {
        let fields: Vec<String> = row.iter().map(|v| format_number(&mut buf, *v)).collect();
        w.write_record(&fields).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn format_number(buf: &mut ryu::Buffer, v: f64) -> String {
    if v.is_finite() {
        buf.format_finite(v).to_string()
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line,
            msg: format!("{}: {other:?}", path.display()),
        },
    }
}

/// Reads a numeric CSV with a header row. Blank lines and lines starting
/// with '#' are skipped.
pub fn read_csv(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        match &header {
            None => header = Some(rec.iter().map(|s| s.to_string()).collect()),
            Some(h) => {
                if rec.len() != h.len() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected {} fields, found {}", h.len(), rec.len()),
                    });
                }
                let row = rec
                    .iter()
                    .map(|f| {
                        f.parse::<f64>().map_err(|_| Error::Parse {
                            line,
                            msg: format!("not a number: {f:?}"),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                rows.push(row);
            }
        }
    }
    let header = header.ok_or(Error::Parse {
        line: 1,
        msg: "missing header row".into(),
    })?;
    Ok(Table { header, rows })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Mode series as (t, re) with t counted from the first sample.
pub fn mode_series_table(series: &ModeSeries) -> Table {
    let mut t = Table::new(&["t", "re"]);
    for (i, v) in series.samples.iter().enumerate() {
        t.push(vec![i as f64 * series.dt_sample, *v]);
    }
    t
}

pub fn mode_series_file_name(k: (i64, i64)) -> String {
    format!("mode_{}_{}.csv", k.0, k.1)
}

/// Reads a mode series written by [`mode_series_table`]; the wavevector is
/// taken from the file name when it follows [`mode_series_file_name`].
pub fn read_mode_series(path: &Path) -> Result<ModeSeries> {
    let table = read_csv(path)?;
    let (t, v) = two_columns(&table, path)?;
    let k = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("mode_"))
        .and_then(|s| {
            let (a, b) = s.rsplit_once('_')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .unwrap_or((0, 0));
    Ok(ModeSeries {
        k,
        dt_sample: uniform_step(&t)?,
        samples: v,
    })
}

/// First two columns of a table (time and value).
pub fn two_columns(table: &Table, path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    if table.header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: format!("{}: expected at least two columns", path.display()),
        });
    }
    Ok(table.rows.iter().map(|r| (r[0], r[1])).unzip())
}

/// Step of a uniform time grid.
pub fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::Validation("series needs at least two samples".into()));
    }
    let step = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let tol = 1e-6 * step.abs().max(f64::MIN_POSITIVE);
    for (i, w) in t.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > tol.max(1e-9 * w[1].abs()) {
            return Err(Error::Parse {
                line: i + 3,
                msg: "time column is not uniformly spaced".into(),
            });
        }
    }
    if !(step > 0.0) {
        return Err(Error::Validation("time column must increase".into()));
    }
    Ok(step)
}

pub fn dispersion_table(curve: &DispersionCurve) -> Table {
    let mut t = Table::new(&["t", "var_x", "stderr", "var_total"]);
    for i in 0..curve.times.len() {
        t.push(vec![curve.times[i], curve.var_x[i], curve.stderr[i], curve.var_total[i]]);
    }
    t
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the manifest directory when possible.
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
    pub seed: u64,
    /// Resolved configuration as key = value lines.
    pub config: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn digest_entry(dir: &Path, path: &Path) -> Result<FileDigest> {
    let shown = path.strip_prefix(dir).unwrap_or(path);
    Ok(FileDigest {
        path: shown.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: Vec<String>, started: u64) -> Self {
        Self {
            command: command.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            started,
            finished: started,
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Digests the given files and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path, inputs: &[PathBuf], outputs: &[PathBuf], finished: u64) -> Result<PathBuf> {
        self.finished = finished;
        self.inputs = inputs.iter().map(|p| digest_entry(dir, p)).collect::<Result<_>>()?;
        self.outputs = outputs.iter().map(|p| digest_entry(dir, p)).collect::<Result<_>>()?;
        let path = dir.join(MANIFEST_NAME);
        write_json(&path, &self)?;
        Ok(path)
    }
}

/// Re-reads a manifest and checks every digest. Returns the files whose
/// digest no longer matches.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let m: Manifest = read_json(&dir.join(MANIFEST_NAME))?;
    let mut bad = Vec::new();
    for f in m.inputs.iter().chain(&m.outputs) {
        let p = Path::new(&f.path);
        let p = if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
        match sha256_file(&p) {
            Ok(d) if d == f.sha256 => {}
            _ => bad.push(f.path.clone()),
        }
    }
    Ok(bad)
}
