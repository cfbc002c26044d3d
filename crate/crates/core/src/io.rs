//! File formats: spin CSV, parameter JSON, output tables and run manifests.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BcError, Result};
use crate::model::{Alpha2, BCParameters, Spin};
use crate::sampler::SampleMatrix;

/// Parse spin data from CSV text.
///
/// One observation per row, cells `-1`, `0` or `1`. The first row is taken
/// as a header of node labels when any of its cells is not an integer.
/// Every other problem is reported with its 1-based line and column.
pub fn parse_spin_csv(text: &str) -> Result<SampleMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut labels: Option<Vec<String>> = None;
    let mut m: Option<usize> = None;
    let mut data: Vec<Spin> = Vec::new();
    let mut n = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| BcError::Input(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if k == 0 && rec.iter().any(|c| c.parse::<i64>().is_err()) {
            labels = Some(rec.iter().map(str::to_owned).collect());
            m = Some(rec.len());
            continue;
        }
        let width = *m.get_or_insert(rec.len());
        if rec.len() != width {
            return Err(BcError::Input(format!(
                "line {line}: expected {width} columns, found {}",
                rec.len()
            )));
        }
        for (j, cell) in rec.iter().enumerate() {
            let col = j + 1;
            if cell.is_empty() {
                return Err(BcError::Input(format!(
                    "line {line}, column {col}: missing value"
                )));
            }
            let v: i64 = cell.parse().map_err(|_| {
                BcError::Input(format!(
                    "line {line}, column {col}: '{cell}' is not an integer"
                ))
            })?;
            if !(-1..=1).contains(&v) {
                return Err(BcError::Input(format!(
                    "line {line}, column {col}: value {v} is not one of -1, 0, 1"
                )));
            }
            data.push(v as Spin);
        }
        n += 1;
    }
    let m = m.ok_or_else(|| BcError::Input("no data rows".into()))?;
    if n == 0 {
        return Err(BcError::Input("no data rows".into()));
    }
    let s = SampleMatrix::new(n, m, data)?;
    match labels {
        Some(l) => s.with_labels(l),
        None => Ok(s),
    }
}

pub fn read_spin_csv(path: &Path) -> Result<SampleMatrix> {
    let text = read_text(path)?;
    parse_spin_csv(&text).map_err(|e| match e {
        BcError::Input(msg) => BcError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// CSV text with a header row of labels.
pub fn spin_csv_string(data: &SampleMatrix) -> String {
    let mut out = String::with_capacity(data.n() * data.m() * 3);
    let labels: Vec<String> = (0..data.m()).map(|s| data.label(s)).collect();
    out.push_str(&labels.join(","));
    out.push('\n');
    for r in data.rows() {
        let cells: Vec<String> = r.iter().map(i8::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Nodes whose observed column takes a single value.
pub fn constant_columns(data: &SampleMatrix) -> Vec<usize> {
    (0..data.m())
        .filter(|&s| {
            let first = data.get(0, s);
            data.column(s).all(|v| v == first)
        })
        .collect()
}

/// JSON layout of a parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub tau: Vec<f64>,
    /// Full symmetric `m × m` matrix with zero diagonal.
    pub sigma: Vec<Vec<f64>>,
    /// A number (shared) or one value per node.
    pub alpha2: Alpha2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl ParamsFile {
    pub fn from_params(p: &BCParameters) -> Self {
        let m = p.m();
        Self {
            tau: p.tau().to_vec(),
            sigma: (0..m)
                .map(|i| (0..m).map(|j| p.sigma()[(i, j)]).collect())
                .collect(),
            alpha2: p.alpha2().clone(),
            labels: None,
        }
    }

    pub fn to_params(&self) -> Result<BCParameters> {
        BCParameters::from_rows(self.tau.clone(), &self.sigma, self.alpha2.clone())
    }
}

pub fn parse_params_json(text: &str) -> Result<ParamsFile> {
    let pf: ParamsFile = parse_json_config(text, "parameter file")?;
    pf.to_params()
        .map_err(|e| BcError::Input(format!("parameter file: {e}")))?;
    if let Some(l) = &pf.labels {
        if l.len() != pf.tau.len() {
            return Err(BcError::Input(format!(
                "parameter file: {} labels for {} nodes",
                l.len(),
                pf.tau.len()
            )));
        }
    }
    Ok(pf)
}

/// Parse a JSON config, reporting the field path of the first error.
pub fn parse_json_config<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        BcError::Input(format!("{what}: at '{path}': {}", e.inner()))
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| BcError::Input(format!("{}: {e}", path.display())))?;
    Ok(s)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes files and remembers their checksums for the manifest.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<FileRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

impl OutputSet {
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, bytes).map_err(|e| BcError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| BcError::Io(e.to_string()))?;
        s.push('\n');
        self.write(path, s.as_bytes())
    }

    pub fn write_table(&mut self, path: &Path, table: &Table) -> Result<()> {
        self.write(path, table.to_csv()?.as_bytes())
    }

    pub fn records(&self) -> &[FileRecord] {
        &self.files
    }
}

/// A CSV table built row by row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| (*h).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)
            .map_err(|e| BcError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| BcError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| BcError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| BcError::Io(e.to_string()))
    }
}

/// Cell text for an optional number; empty when absent or not finite.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => x.to_string(),
        _ => String::new(),
    }
}

pub fn fmt(v: f64) -> String {
    fmt_opt(Some(v))
}

/// Record of one CLI run, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Every option after defaults were applied.
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }
}

/// `<prefix><suffix>` as a path, e.g. `out/run` + `_edges.csv`.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
