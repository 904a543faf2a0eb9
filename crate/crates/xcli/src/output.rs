//! Report envelopes and CSV emission.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use fracnelson::grid::sig17;

pub const SCHEMA: &str = "fracnelson-report/1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// RFC-4180 writer with CRLF records.
pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w)
}

/// 17 significant digits; blank for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        sig17(x)
    }
}

/// One `(t, h, spec)` cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub cell: usize,
    pub parameters: String,
    pub estimate: f64,
    pub se: f64,
    pub verdict: String,
}

pub const ROW_HEADER: [&str; 6] = ["experiment", "cell", "parameters", "estimate", "se", "verdict"];

pub fn rows_to_csv(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut w = csv_writer(Vec::new());
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.cell.to_string(),
            r.parameters.clone(),
            num(r.estimate),
            num(r.se),
            r.verdict.clone(),
        ])?;
    }
    w.into_inner().context("flushing CSV")
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
