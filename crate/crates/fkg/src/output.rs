//! Result rows and plot data, and writing them to disk.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ValidationError;

/// One CSV row. The provenance columns stay empty for deterministic rows.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub op: String,
    pub inputs_json: String,
    pub value: f64,
    pub error: Option<f64>,
    pub method: String,
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub n_steps: Option<usize>,
    pub timestamp: String,
}

/// Monte Carlo provenance of a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    /// File stem under `plots/`.
    pub name: String,
    /// Column labels, written as a `#` comment.
    pub header: String,
    pub points: Vec<(f64, f64, Option<f64>)>,
}

impl PlotSeries {
    pub fn new(name: impl Into<String>, header: impl Into<String>) -> Self {
        PlotSeries {
            name: name.into(),
            header: header.into(),
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64, value: f64, error: Option<f64>) {
        self.points.push((x, value, error));
    }

    pub fn render(&self) -> String {
        let mut s = format!("# {}\n", self.header);
        for (x, v, e) in &self.points {
            match e {
                Some(e) => s.push_str(&format!("{x:e} {v:e} {e:e}\n")),
                None => s.push_str(&format!("{x:e} {v:e}\n")),
            }
        }
        s
    }
}

/// Everything a subcommand produced.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub plots: Vec<PlotSeries>,
    /// Extra JSON documents, by file name.
    pub documents: Vec<(String, Value)>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
}

/// Builds rows for one experiment with a shared timestamp.
pub struct RowBuilder {
    experiment_id: String,
    timestamp: String,
}

impl RowBuilder {
    pub fn new(experiment_id: &str) -> Self {
        RowBuilder {
            experiment_id: experiment_id.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        }
    }

    pub fn row(
        &self,
        op: &str,
        inputs: Value,
        value: f64,
        error: Option<f64>,
        method: &str,
        prov: Option<Provenance>,
    ) -> ResultRow {
        ResultRow {
            experiment_id: self.experiment_id.clone(),
            op: op.to_string(),
            inputs_json: inputs.to_string(),
            value,
            error,
            method: method.to_string(),
            seed: prov.map(|p| p.seed),
            n_paths: prov.map(|p| p.n_paths),
            n_steps: prov.map(|p| p.n_steps),
            timestamp: self.timestamp.clone(),
        }
    }
}

/// A JSON object from `(key, value)` pairs. Keys come out sorted.
pub fn echo<const N: usize>(pairs: [(&str, Value); N]) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "experiment_id",
        "op",
        "inputs_json",
        "value",
        "error",
        "method",
        "seed",
        "n_paths",
        "n_steps",
        "timestamp",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> ValidationError {
    ValidationError::new("--out", format!("{}: {e}", path.display()))
}

/// Writes the CSV, plot files and documents under `dir`; returns the paths.
pub fn write_report(dir: &Path, csv_name: &str, plots: bool, report: &Report) -> Result<Vec<PathBuf>, ValidationError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    let csv_path = dir.join(csv_name);
    let file = fs::File::create(&csv_path).map_err(|e| io_error(&csv_path, e))?;
    write_csv(file, &report.rows).map_err(|e| io_error(&csv_path, e))?;
    written.push(csv_path);
    if plots && !report.plots.is_empty() {
        let pdir = dir.join("plots");
        fs::create_dir_all(&pdir).map_err(|e| io_error(&pdir, e))?;
        for p in &report.plots {
            let path = pdir.join(format!("{}.dat", p.name));
            fs::write(&path, p.render()).map_err(|e| io_error(&path, e))?;
            written.push(path);
        }
    }
    for (name, doc) in &report.documents {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(doc).map_err(|e| io_error(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
