//! Frame feature matrices and their on-disk formats.
//!
//! The binary `FMAT` layout (all little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `FMAT`                  |
//! | 4      | 2    | version, `1`                  |
//! | 6      | 2    | flags, `0`                    |
//! | 8      | 8    | frame count `T` (u64)         |
//! | 16     | 8    | feature dimension `d` (u64)   |
//! | 24     | 8    | base frame rate in Hz (f64)   |
//! | 32     | 4·T·d| row-major f32 payload         |
//!
//! The CSV form is one frame per line with comma-separated decimals; it
//! carries no frame rate, so callers supply one.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, malformed, Error, Result};

pub const FMAT_MAGIC: &[u8; 4] = b"FMAT";
pub const FMAT_VERSION: u16 = 1;
const FMAT_HEADER_LEN: usize = 32;

/// A `T × d` matrix of frame features plus the frame rate it was sampled at.
///
/// Rows are frames. Storage is a contiguous row-major `f32` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f32>,
    frames: usize,
    dim: usize,
    base_rate_hz: f64,
}

impl FeatureSequence {
    /// Builds a sequence from a row-major buffer, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(data: Vec<f32>, frames: usize, dim: usize, base_rate_hz: f64) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(invalid!(
                "feature matrix must be non-empty, got {frames}x{dim}"
            ));
        }
        let expected = frames
            .checked_mul(dim)
            .ok_or_else(|| invalid!("feature shape {frames}x{dim} overflows"))?;
        if data.len() != expected {
            return Err(invalid!(
                "feature buffer holds {} values, shape {frames}x{dim} needs {expected}",
                data.len()
            ));
        }
        if !(base_rate_hz.is_finite() && base_rate_hz > 0.0) {
            return Err(invalid!(
                "base frame rate must be positive, got {base_rate_hz}"
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid!(
                "non-finite feature value {} at frame {}, dim {}",
                data[pos],
                pos / dim,
                pos % dim
            ));
        }
        Ok(Self {
            data,
            frames,
            dim,
            base_rate_hz,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R], base_rate_hz: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(invalid!(
                    "frame {t} has {} values, expected {dim}",
                    row.len()
                ));
            }
            data.extend_from_slice(row);
        }
        Self::new(data, rows.len(), dim, base_rate_hz)
    }

    /// Joins sequences along time. All parts must share `d`; the rate of the
    /// first part is kept.
    pub fn concat(parts: &[FeatureSequence]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| invalid!("cannot concatenate zero sequences"))?;
        let mut data = Vec::new();
        let mut frames = 0;
        for p in parts {
            if p.dim != first.dim {
                return Err(invalid!("dimension mismatch: {} vs {}", p.dim, first.dim));
            }
            data.extend_from_slice(&p.data);
            frames += p.frames;
        }
        Self::new(data, frames, first.dim, first.base_rate_hz)
    }

    /// Copies frames `[start, end)` into a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.frames {
            return Err(Error::Bounds(format!(
                "frame range {start}..{end} outside 0..{}",
                self.frames
            )));
        }
        Ok(Self {
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            frames: end - start,
            dim: self.dim,
            base_rate_hz: self.base_rate_hz,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base_rate_hz(&self) -> f64 {
        self.base_rate_hz
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Duration of the sequence in seconds.
    pub fn seconds(&self) -> f64 {
        self.frames as f64 / self.base_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureFormat {
    #[default]
    Binary,
    Csv,
}

impl FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "fmat" | "bin" => Ok(Self::Binary),
            "csv" => Ok(Self::Csv),
            other => Err(invalid!("unknown feature format `{other}` (binary|csv)")),
        }
    }
}

impl fmt::Display for FeatureFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Binary => "binary",
            Self::Csv => "csv",
        })
    }
}

/// Loads a feature matrix. `csv_rate_hz` is only consulted for CSV input;
/// binary files carry their own rate.
pub fn load_features(
    path: impl AsRef<Path>,
    format: FeatureFormat,
    csv_rate_hz: f64,
) -> Result<FeatureSequence> {
    let path = path.as_ref();
    match format {
        FeatureFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_fmat(&bytes)
        }
        FeatureFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text, csv_rate_hz)
        }
    }
}

pub fn save_features(
    seq: &FeatureSequence,
    path: impl AsRef<Path>,
    format: FeatureFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        FeatureFormat::Binary => encode_fmat(seq),
        FeatureFormat::Csv => format_csv(seq).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_fmat(seq: &FeatureSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(FMAT_HEADER_LEN + seq.data.len() * 4);
    out.extend_from_slice(FMAT_MAGIC);
    out.extend_from_slice(&FMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(seq.frames as u64).to_le_bytes());
    out.extend_from_slice(&(seq.dim as u64).to_le_bytes());
    out.extend_from_slice(&seq.base_rate_hz.to_le_bytes());
    for v in &seq.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_fmat(bytes: &[u8]) -> Result<FeatureSequence> {
    if bytes.len() < FMAT_HEADER_LEN {
        return Err(malformed!(
            "FMAT header needs {FMAT_HEADER_LEN} bytes, file has {}",
            bytes.len()
        ));
    }
    if &bytes[0..4] != FMAT_MAGIC {
        return Err(malformed!(
            "bad magic {:?}, expected \"FMAT\"",
            &bytes[0..4]
        ));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FMAT_VERSION {
        return Err(malformed!("unsupported FMAT version {version}"));
    }
    let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
    if flags != 0 {
        return Err(malformed!("unsupported FMAT flags {flags:#06x}"));
    }
    let frames = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let rate = f64::from_le_bytes(bytes[24..32].try_into().unwrap());

    let payload = &bytes[FMAT_HEADER_LEN..];
    let expected = frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| n <= usize::MAX as u64)
        .ok_or_else(|| malformed!("FMAT shape {frames}x{dim} overflows"))?;
    if payload.len() as u64 != expected {
        return Err(malformed!(
            "FMAT payload is {} bytes, header {frames}x{dim} needs {expected}",
            payload.len()
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    FeatureSequence::new(data, frames as usize, dim as usize, rate)
}

pub fn parse_csv(text: &str, base_rate_hz: f64) -> Result<FeatureSequence> {
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f32>()
                    .map_err(|e| malformed!("line {}: `{}`: {e}", lineno + 1, tok.trim()))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    FeatureSequence::from_rows(&rows, base_rate_hz)
}

pub fn format_csv(seq: &FeatureSequence) -> String {
    let mut out = String::new();
    for row in seq.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
