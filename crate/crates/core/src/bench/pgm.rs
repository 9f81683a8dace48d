use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;

/// Magnitude range mapped onto `0..=65535`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgmScale {
    pub min: f64,
    pub max: f64,
}

impl PgmScale {
    /// Magnitude represented by a stored sample.
    pub fn value(&self, level: u16) -> f64 {
        self.min + (self.max - self.min) * level as f64 / 65535.0
    }
}

/// Quantized magnitude image, min–max scaled. A constant image maps to 0.
pub fn quantize(x: &ComplexField) -> (Vec<u16>, PgmScale) {
    let mag = x.magnitude();
    let min = mag.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = mag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let levels = mag.iter().map(|m| if span > 0.0 { ((m - min) / span * 65535.0).round() as u16 } else { 0 }).collect();
    (levels, PgmScale { min, max })
}

/// Writes a binary 16-bit PGM (`P5`, big-endian samples).
pub fn write_pgm16(path: &Path, x: &ComplexField) -> Result<PgmScale> {
    let (levels, scale) = quantize(x);
    let mut bytes = format!("P5\n{} {}\n65535\n", x.cols(), x.rows()).into_bytes();
    for l in levels {
        bytes.extend_from_slice(&l.to_be_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(scale)
}

/// Reads back `(rows, cols, samples)` from a file written by [`write_pgm16`].
pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::format(path, m);
    let mut fields = Vec::with_capacity(4);
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
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("not a 16-bit binary PGM"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad dimensions"));
    let (cols, rows) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != 2 * rows * cols {
        return Err(bad("sample count does not match the header"));
    }
    let samples = body.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect();
    Ok((rows, cols, samples))
}
