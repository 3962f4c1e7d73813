//! CSV ingestion and atomic output files.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use georisk_core::geometry::find_duplicate;
use georisk_core::{Point, RegularGrid, SpatialSample};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Sqrt,
}

impl Transform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::None => v,
            Transform::Sqrt => v.sqrt(),
        }
    }
}

pub fn ingest_csv(path: &Path, transform: Transform) -> Result<SpatialSample> {
    let file = fs::File::open(path).map_err(CliError::io(path))?;
    ingest_reader(file, &path.display().to_string(), transform)
}

/// Reads `x,y,value` rows (header names case-insensitive, any column order).
pub fn ingest_reader(reader: impl Read, name: &str, transform: Transform) -> Result<SpatialSample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Data(format!("{name}: unreadable header: {e}")))?.clone();
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(col))
            .ok_or_else(|| CliError::Data(format!("{name}: missing column '{col}'")))
    };
    let (ix, iy, iv) = (find("x")?, find("y")?, find("value")?);
    let mut locations: Vec<Point> = Vec::new();
    let mut values = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, col: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| CliError::Data(format!("{name}: line {line}: cannot parse {col} '{raw}'")))?;
            if !v.is_finite() {
                return Err(CliError::Data(format!("{name}: line {line}: non-finite {col}")));
            }
            Ok(v)
        };
        let (x, y, raw) = (field(ix, "x")?, field(iy, "y")?, field(iv, "value")?);
        if transform == Transform::Sqrt && raw < 0.0 {
            return Err(CliError::Data(format!("{name}: line {line}: negative value {raw} under sqrt transform")));
        }
        locations.push([x, y]);
        values.push(transform.apply(raw));
        lines.push(line);
    }
    if locations.is_empty() {
        return Err(CliError::Data(format!("{name}: no data rows")));
    }
    if let Some((a, b)) = find_duplicate(&locations) {
        return Err(CliError::Data(format!("{name}: lines {} and {} have the same location", lines[a], lines[b])));
    }
    SpatialSample::new(locations, values).map_err(|e| CliError::Data(format!("{name}: {e}")))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.write_record(&r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(v) => v.to_string(),
        None => "NA".into(),
    }
}

/// Long-format grid table `x,y,<column>`; masked nodes are written as `NA`.
pub fn grid_csv(grid: &RegularGrid, values: &[Option<f64>], column: &str) -> Vec<u8> {
    let rows = grid.nodes().into_iter().zip(values).map(|(p, v)| vec![p[0].to_string(), p[1].to_string(), fmt_value(*v)]);
    csv_bytes(&["x", "y", column], rows)
}

pub fn table_csv(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    csv_bytes(header, rows)
}

/// Parses `NXxNY` (or a single `N` for a square grid).
pub fn parse_grid(s: &str) -> std::result::Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let nums: std::result::Result<Vec<usize>, _> = parts.iter().map(|p| p.trim().parse::<usize>()).collect();
    match nums.as_deref() {
        Ok([n]) if *n > 0 => Ok([*n, *n]),
        Ok([a, b]) if *a > 0 && *b > 0 => Ok([*a, *b]),
        _ => Err(format!("expected NXxNY with positive sizes, got '{s}'")),
    }
}
