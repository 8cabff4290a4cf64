//! Waypoint input (JSON or CSV) and number formatting for output files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polyline::{Polyline, PolylineError};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Polyline(#[from] PolylineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointFile {
    pub dimension: usize,
    pub waypoints: Vec<Vec<f64>>,
}

impl From<&Polyline> for WaypointFile {
    fn from(pl: &Polyline) -> Self {
        Self {
            dimension: pl.dimension(),
            waypoints: pl.waypoints().map(<[f64]>::to_vec).collect(),
        }
    }
}

pub fn parse_json(text: &str) -> Result<Polyline, InputError> {
    let file: WaypointFile = serde_json::from_str(text)?;
    for (i, w) in file.waypoints.iter().enumerate() {
        if w.len() != file.dimension {
            return Err(InputError::Format(format!(
                "waypoint {i} has {} coordinates, declared dimension is {}",
                w.len(),
                file.dimension
            )));
        }
    }
    Ok(Polyline::new(file.waypoints)?)
}

/// Headerless CSV, or CSV whose first row is `x0,x1,…`. Lines starting with `#` are skipped.
pub fn parse_csv(text: &str) -> Result<Polyline, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if line == 0 && record.iter().enumerate().all(|(j, f)| f == format!("x{j}")) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    InputError::Format(format!("row {}: `{f}` is not a number", line + 1))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(Polyline::new(rows)?)
}

/// Chooses the parser by extension, falling back to sniffing for a leading `{`.
pub fn read_polyline(path: &Path) -> Result<Polyline, InputError> {
    let text = fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_json(&text),
        Some("csv") => parse_csv(&text),
        _ if text.trim_start().starts_with('{') => parse_json(&text),
        _ => parse_csv(&text),
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_waypoints_csv<W: Write>(pl: &Polyline, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..pl.dimension()).map(|j| format!("x{j}")))?;
    for p in pl.waypoints() {
        w.write_record(p.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}
