//! Finite scalar quantization.
//!
//! Each dimension is squashed with `tanh`, scaled to `±(ℓ - 1) / 2` and
//! rounded half away from zero. The per-dimension digits combine into one
//! code by mixed-radix composition, first dimension most significant.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::features::FeatureSequence;

/// Per-dimension level counts. `K` is their product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FsqRepr", into = "FsqRepr")]
pub struct FsqSpec {
    levels: Vec<u32>,
    codebook_size: u64,
}

#[derive(Serialize, Deserialize)]
struct FsqRepr {
    levels: Vec<u32>,
}

impl TryFrom<FsqRepr> for FsqSpec {
    type Error = Error;

    fn try_from(r: FsqRepr) -> Result<Self> {
        FsqSpec::new(r.levels)
    }
}

impl From<FsqSpec> for FsqRepr {
    fn from(s: FsqSpec) -> Self {
        FsqRepr { levels: s.levels }
    }
}

impl FsqSpec {
    pub fn new(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid!("FSQ needs at least one dimension"));
        }
        if let Some(&l) = levels.iter().find(|&&l| l < 3 || l % 2 == 0) {
            return Err(invalid!("FSQ levels must be odd and >= 3, got {l}"));
        }
        let codebook_size = levels
            .iter()
            .try_fold(1u64, |acc, &l| acc.checked_mul(l as u64))
            .ok_or_else(|| invalid!("FSQ codebook size overflows u64"))?;
        Ok(Self {
            levels,
            codebook_size,
        })
    }

    /// `[5, 5, 3, 3, 3, 3, 3, 3]`: 8 dimensions, 18225 codes.
    pub fn k18225() -> Self {
        Self::new(vec![5, 5, 3, 3, 3, 3, 3, 3]).expect("valid levels")
    }

    /// `[5, 5, 5, 5, 5, 3, 3, 3]`: 8 dimensions, 84375 codes.
    pub fn k84375() -> Self {
        Self::new(vec![5, 5, 5, 5, 5, 3, 3, 3]).expect("valid levels")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('[') {
            let levels: Vec<u32> =
                serde_json::from_str(text).map_err(|e| invalid!("FSQ levels JSON: {e}"))?;
            return Self::new(levels);
        }
        serde_json::from_str(text).map_err(|e| invalid!("FSQ spec JSON: {e}"))
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// `d_Q`.
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// `K`.
    pub fn codebook_size(&self) -> u64 {
        self.codebook_size
    }

    /// Code of the zero vector.
    pub fn central_code(&self) -> u64 {
        let digits: Vec<u32> = self.levels.iter().map(|l| (l - 1) / 2).collect();
        self.compose(&digits).expect("central digits in range")
    }

    /// Splits a code into per-dimension digits in `0..ℓ_k`.
    pub fn decompose(&self, code: u64) -> Result<Vec<u32>> {
        if code >= self.codebook_size {
            return Err(Error::Bounds(format!(
                "code {code} outside codebook of size {}",
                self.codebook_size
            )));
        }
        let mut digits = vec![0; self.levels.len()];
        let mut rest = code;
        for (d, &l) in digits.iter_mut().zip(&self.levels).rev() {
            *d = (rest % l as u64) as u32;
            rest /= l as u64;
        }
        Ok(digits)
    }

    pub fn compose(&self, digits: &[u32]) -> Result<u64> {
        if digits.len() != self.levels.len() {
            return Err(invalid!(
                "{} digits for {} FSQ dimensions",
                digits.len(),
                self.levels.len()
            ));
        }
        let mut code = 0u64;
        for (&d, &l) in digits.iter().zip(&self.levels) {
            if d >= l {
                return Err(Error::Bounds(format!("digit {d} outside 0..{l}")));
            }
            code = code * l as u64 + d as u64;
        }
        Ok(code)
    }

    pub fn quantize(&self, v: &[f32]) -> Result<u64> {
        if v.len() != self.levels.len() {
            return Err(invalid!(
                "vector has {} dims, FSQ expects {}",
                v.len(),
                self.levels.len()
            ));
        }
        let mut code = 0u64;
        for (&x, &l) in v.iter().zip(&self.levels) {
            if !x.is_finite() {
                return Err(invalid!("non-finite FSQ input {x}"));
            }
            let half = ((l - 1) / 2) as f64;
            // f64::round rounds half away from zero
            let q = ((x as f64).tanh() * half).round().clamp(-half, half);
            code = code * l as u64 + (q + half) as u64;
        }
        Ok(code)
    }

    /// Normalised lattice point of `code`, each component in `[-1, 1]`.
    pub fn dequantize(&self, code: u64) -> Result<Vec<f32>> {
        let digits = self.decompose(code)?;
        Ok(digits
            .iter()
            .zip(&self.levels)
            .map(|(&d, &l)| {
                let half = ((l - 1) / 2) as f64;
                ((d as f64 - half) / half) as f32
            })
            .collect())
    }

    pub fn quantize_seq(&self, rows: &FeatureSequence) -> Result<Vec<u64>> {
        if rows.dim() != self.dim() {
            return Err(invalid!(
                "rows have width {}, FSQ expects {}",
                rows.dim(),
                self.dim()
            ));
        }
        rows.rows().map(|r| self.quantize(r)).collect()
    }
}

pub fn fsq_quantize(v: &[f32], spec: &FsqSpec) -> Result<u64> {
    spec.quantize(v)
}

pub fn fsq_dequantize(code: u64, spec: &FsqSpec) -> Result<Vec<f32>> {
    spec.dequantize(code)
}

pub fn fsq_quantize_seq(rows: &FeatureSequence, spec: &FsqSpec) -> Result<Vec<u64>> {
    spec.quantize_seq(rows)
}
