//! On-disk formats.
//!
//! CSV files are comma separated with one header row. Floats are written in
//! Rust's shortest round-trip form, so equal values give equal bytes.
//! Snapshots are raw little-endian `f64` arrays, row-major by x-index
//! (`values[i * ny + j]` is node `(x_i, y_j)`), with a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField};

/// In-memory CSV table; rendered only when written.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Internal(format!("csv: {other:?}")),
    }
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        CsvTable { header, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.write_record(&self.header).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(vec![]);
        self.write_to(&mut w).expect("in-memory csv");
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(&mut csv::Writer::from_path(path).map_err(csv_error)?)
    }
}

/// Appends CSV rows to a file as they are produced.
pub struct CsvStream {
    writer: csv::Writer<fs::File>,
}

impl CsvStream {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path).map_err(csv_error)?;
        writer.write_record(header).map_err(csv_error)?;
        Ok(CsvStream { writer })
    }

    pub fn row(&mut self, row: &[String]) -> Result<()> {
        self.writer.write_record(row).map_err(csv_error)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        "nan".into()
    } else if a == 0.0 || (1e-4..1e15).contains(&a) || a.is_infinite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Metadata stored next to a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub quantity: String,
    pub t: f64,
    pub step: u64,
    pub nx: usize,
    pub ny: usize,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    /// Always `"f64-le"`.
    pub dtype: String,
    /// Always `"row-major-x"`: index `i * ny + j`.
    pub order: String,
    pub file: String,
}

pub const SNAPSHOT_DTYPE: &str = "f64-le";
pub const SNAPSHOT_ORDER: &str = "row-major-x";

/// Writes `<dir>/<stem>.bin` and `<dir>/<stem>.json`; returns the binary path.
pub fn write_snapshot(dir: &Path, stem: &str, quantity: &str, field: &ScalarField, t: f64, step: u64) -> Result<PathBuf> {
    let g = field.grid;
    let bin = dir.join(format!("{stem}.bin"));
    let mut bytes = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes)?;
    let meta = SnapshotMeta {
        quantity: quantity.into(),
        t,
        step,
        nx: g.nx,
        ny: g.ny,
        xmin: g.xmin,
        xmax: g.xmax,
        ymin: g.ymin,
        ymax: g.ymax,
        dtype: SNAPSHOT_DTYPE.into(),
        order: SNAPSHOT_ORDER.into(),
        file: format!("{stem}.bin"),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(bin)
}

/// Reads a snapshot back through its sidecar.
pub fn read_snapshot(sidecar: &Path) -> Result<(SnapshotMeta, ScalarField)> {
    let text = fs::read_to_string(sidecar)?;
    let meta: SnapshotMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if meta.dtype != SNAPSHOT_DTYPE || meta.order != SNAPSHOT_ORDER {
        return Err(Error::config("snapshot", format!("unsupported layout {}/{}", meta.dtype, meta.order)));
    }
    let dir = sidecar.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&meta.file))?;
    if bytes.len() != meta.nx * meta.ny * 8 {
        return Err(Error::config(
            "snapshot",
            format!("{} bytes for a {}x{} grid", bytes.len(), meta.nx, meta.ny),
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let grid = Grid2D::new(meta.xmin, meta.xmax, meta.ymin, meta.ymax, meta.nx, meta.ny)?;
    let field = ScalarField::from_values(grid, values)?;
    Ok((meta, field))
}

/// Run summary written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub version: &'static str,
    pub status: &'a str,
    pub config: &'a C,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ManifestError>,
    /// Last completed step for a failed run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completed_steps: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestError {
    pub kind: &'static str,
    pub message: String,
}

impl From<&Error> for ManifestError {
    fn from(e: &Error) -> Self {
        ManifestError {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

pub fn write_manifest<C: Serialize>(dir: &Path, m: &Manifest<'_, C>) -> Result<()> {
    let json = serde_json::to_string_pretty(m).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}
