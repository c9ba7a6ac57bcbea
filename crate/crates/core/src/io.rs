//! CSV input and output for point sets.
//!
//! Point files have a header naming coordinate columns `x1, …, xd` and an
//! optional `weight` column; without weights every row gets mass 1/n.
//! Floats are written with 17 significant digits so they round-trip.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;

/// Lossless scientific formatting with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_measure(reader: impl Read) -> Result<EmpiricalMeasure> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut coord_cols = Vec::new();
    let mut weight_col = None;
    for (i, h) in headers.iter().enumerate() {
        if h == "weight" {
            if weight_col.replace(i).is_some() {
                return Err(Error::arg("duplicate weight column"));
            }
        } else if let Some(k) = h.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
            coord_cols.push((k, i));
        } else {
            return Err(Error::arg(format!(
                "unexpected column '{h}', expected x1..xd and optional weight"
            )));
        }
    }
    coord_cols.sort();
    if coord_cols.is_empty() || coord_cols.iter().enumerate().any(|(j, &(k, _))| k != j + 1) {
        return Err(Error::arg("coordinate columns must be exactly x1..xd"));
    }
    let dim = coord_cols.len();
    let (mut coords, mut weights) = (Vec::new(), Vec::new());
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::arg(format!(
                    "row {}: cannot parse '{raw}' as a number",
                    line + 1
                ))
            })
        };
        for &(_, i) in &coord_cols {
            coords.push(field(i)?);
        }
        if let Some(i) = weight_col {
            weights.push(field(i)?);
        }
    }
    if coords.is_empty() {
        return Err(Error::arg("point file has no rows"));
    }
    if weight_col.is_some() {
        EmpiricalMeasure::from_weighted(dim, coords, weights)
    } else {
        EmpiricalMeasure::from_flat(dim, coords)
    }
}

pub fn read_measure_file(path: impl AsRef<Path>) -> Result<EmpiricalMeasure> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::arg(format!("cannot open {}: {e}", path.display())))?;
    read_measure(std::io::BufReader::new(file))
}

/// Write sample points with an `x1..xd` header.
pub fn write_points(writer: impl Write, points: &[Vec<f64>]) -> Result<()> {
    let dim = points.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=dim).map(|k| format!("x{k}")))?;
    for p in points {
        if p.len() != dim {
            return Err(Error::arg("points have inconsistent dimensions"));
        }
        w.write_record(p.iter().map(|&x| format_float(x)))?;
    }
    w.flush()?;
    Ok(())
}
