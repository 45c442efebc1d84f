//! Heatmap emission: a CSV grid plus an 8-bit binary PGM.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::{BeeError, Result};

/// Pixel value used for every cell when the grid has zero range.
pub const FLAT_PIXEL: u8 = 128;

/// Min-max maps a rectangular grid to bytes, row-major.
pub fn to_pixels(values: &[Vec<f64>]) -> Result<Vec<u8>> {
    let cols = values.first().map_or(0, Vec::len);
    if values.is_empty() || cols == 0 || values.iter().any(|r| r.len() != cols) {
        return Err(BeeError::arg("heatmap grid must be rectangular and non-empty"));
    }
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(BeeError::arg("heatmap values must be finite"));
    }
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    Ok(values
        .iter()
        .flatten()
        .map(|&v| {
            if range > 0.0 {
                (255.0 * (v - lo) / range).round() as u8
            } else {
                FLAT_PIXEL
            }
        })
        .collect())
}

/// Writes `<stem>.csv` and `<stem>.pgm`; returns both paths.
pub fn emit_heatmap(values: &[Vec<f64>], stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let pixels = to_pixels(values)?;
    let (rows, cols) = (values.len(), values[0].len());
    // Appended, not swapped: stems such as `grid_lambda0.5_seed0` contain dots.
    let with_ext = |ext: &str| {
        let mut name = stem.as_os_str().to_owned();
        name.push(ext);
        PathBuf::from(name)
    };
    let (csv_path, pgm_path) = (with_ext(".csv"), with_ext(".pgm"));
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    for row in values {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{}", line.join(","))?;
    }
    csv.flush()?;
    let mut pgm = BufWriter::new(File::create(&pgm_path)?);
    write!(pgm, "P5\n{cols} {rows}\n255\n")?;
    pgm.write_all(&pixels)?;
    pgm.flush()?;
    Ok((csv_path, pgm_path))
}

/// Parses a P5 file written by [`emit_heatmap`]: (cols, rows, pixels).
pub fn read_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(BeeError::Format("truncated PGM header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| BeeError::Format("bad PGM header".into()))?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(BeeError::Format("expected an 8-bit P5 image".into()));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| BeeError::Format("bad PGM dimension".into()));
    let (cols, rows) = (parse(fields[1])?, parse(fields[2])?);
    let data = &bytes[pos + 1..];
    if data.len() != cols * rows {
        return Err(BeeError::Format("PGM pixel count does not match its header".into()));
    }
    Ok((cols, rows, data.to_vec()))
}
