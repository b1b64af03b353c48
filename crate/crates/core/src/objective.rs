//! Segment cohesion costs and the surrogate objectives built from them.
//!
//! Every objective here decomposes over segments: the score of a scheme is
//! `-Σ penalty(segment)`. That is what lets the scheduler optimise any of
//! them with the same dynamic program.
//!
//! Segments are addressed by `(end, len)` where `end` is the exclusive 0-based
//! end frame, so the segment covers frames `end - len .. end`. Read as a
//! 1-based inclusive index this is the usual end-anchored `L(j, s)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::downsample::segment_mean;
use crate::error::{invalid, Error, Result};
use crate::features::FeatureSequence;
use crate::scheme::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Length-normalised intra-segment pairwise distance.
    #[default]
    Jh,
    /// Frame-wise L2 distance to the segment-mean reconstruction.
    L2,
    /// Frame-wise cosine similarity to the segment-mean reconstruction.
    Cosine,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jh" => Ok(Self::Jh),
            "l2" => Ok(Self::L2),
            "cosine" | "cos" => Ok(Self::Cosine),
            other => Err(invalid!("unknown objective `{other}` (jh|l2|cosine)")),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Jh => "jh",
            Self::L2 => "l2",
            Self::Cosine => "cosine",
        })
    }
}

pub(crate) fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn cosine(a: &[f32], b: &[f32]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na.sqrt() * nb.sqrt()))
}

fn check_segment(h: &FeatureSequence, end: usize, len: usize) -> Result<()> {
    if len == 0 || len > end || end > h.frames() {
        return Err(Error::Bounds(format!(
            "segment (end {end}, len {len}) outside a {}-frame sequence",
            h.frames()
        )));
    }
    Ok(())
}

/// Sum of pairwise distances inside `start..end`.
///
/// Accumulation order is fixed: for each frame `k` in ascending order, the
/// distances to earlier frames are summed nearest-first and then added to the
/// running total. [`CostTable`] reproduces this order incrementally, which
/// keeps table entries bit-identical to direct evaluation.
fn pair_distance_sum(h: &FeatureSequence, start: usize, end: usize) -> f64 {
    let mut total = 0.0;
    for k in start + 1..end {
        let mut inner = 0.0;
        for m in (start..k).rev() {
            inner += euclidean(h.row(m), h.row(k));
        }
        total += inner;
    }
    total
}

/// Cohesion cost `L(end, len)`: the pairwise Euclidean distances within the
/// segment, summed and divided by its length. Zero for single frames.
pub fn segment_cost(h: &FeatureSequence, end: usize, len: usize) -> Result<f64> {
    check_segment(h, end, len)?;
    Ok(pair_distance_sum(h, end - len, end) / len as f64)
}

fn l2_penalty(h: &FeatureSequence, start: usize, len: usize) -> f64 {
    let mean = segment_mean(h, start, len);
    (start..start + len)
        .map(|t| euclidean(h.row(t), &mean))
        .sum()
}

fn cosine_gain(h: &FeatureSequence, start: usize, len: usize, zero_norm: &mut usize) -> f64 {
    let mean = segment_mean(h, start, len);
    (start..start + len)
        .map(|t| {
            cosine(h.row(t), &mean).unwrap_or_else(|| {
                *zero_norm += 1;
                0.0
            })
        })
        .sum()
}

/// Per-segment penalty under `objective`; the scheme score is minus the sum.
pub fn segment_penalty(
    h: &FeatureSequence,
    objective: Objective,
    end: usize,
    len: usize,
) -> Result<f64> {
    check_segment(h, end, len)?;
    let start = end - len;
    Ok(match objective {
        Objective::Jh => pair_distance_sum(h, start, end) / len as f64,
        Objective::L2 => l2_penalty(h, start, len),
        Objective::Cosine => -cosine_gain(h, start, len, &mut 0),
    })
}

/// Precomputed penalties for every segment of length `1..=U` ending at every
/// frame.
#[derive(Debug, Clone)]
pub struct CostTable {
    values: Vec<f64>,
    frames: usize,
    max_seg: usize,
    objective: Objective,
}

impl CostTable {
    pub fn build(h: &FeatureSequence, max_seg: usize, objective: Objective) -> Result<Self> {
        if max_seg == 0 {
            return Err(invalid!("segment cap U must be at least 1"));
        }
        match objective {
            Objective::Jh => Ok(Self::build_pairwise(h, max_seg)),
            Objective::L2 | Objective::Cosine => {
                let frames = h.frames();
                let mut values = vec![f64::NAN; frames * max_seg];
                for end in 1..=frames {
                    for len in 1..=max_seg.min(end) {
                        values[(end - 1) * max_seg + len - 1] =
                            segment_penalty(h, objective, end, len)?;
                    }
                }
                Ok(Self {
                    values,
                    frames,
                    max_seg,
                    objective,
                })
            }
        }
    }

    /// Cohesion costs by extension: the pair sum of the length-`s` segment
    /// ending at `j` is the pair sum of the length-`s-1` segment ending at
    /// `j-1` plus the distances from frame `j` back to the others.
    fn build_pairwise(h: &FeatureSequence, max_seg: usize) -> Self {
        let frames = h.frames();
        let mut values = vec![f64::NAN; frames * max_seg];
        let mut prev_pairs = vec![0.0f64; max_seg + 1];
        let mut pairs = vec![0.0f64; max_seg + 1];
        for end in 1..=frames {
            let newest = end - 1;
            let mut inner = 0.0;
            pairs[1] = 0.0;
            values[(end - 1) * max_seg] = 0.0;
            for len in 2..=max_seg.min(end) {
                inner += euclidean(h.row(end - len), h.row(newest));
                pairs[len] = prev_pairs[len - 1] + inner;
                values[(end - 1) * max_seg + len - 1] = pairs[len] / len as f64;
            }
            std::mem::swap(&mut prev_pairs, &mut pairs);
        }
        Self {
            values,
            frames,
            max_seg,
            objective: Objective::Jh,
        }
    }

    /// Penalty of the segment `end - len .. end`, if it fits.
    #[inline]
    pub fn get(&self, end: usize, len: usize) -> Option<f64> {
        if len == 0 || len > self.max_seg || len > end || end > self.frames {
            return None;
        }
        Some(self.values[(end - 1) * self.max_seg + len - 1])
    }

    /// Unchecked lookup for the DP inner loop.
    #[inline]
    pub(crate) fn at(&self, end: usize, len: usize) -> f64 {
        self.values[(end - 1) * self.max_seg + len - 1]
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn max_seg(&self) -> usize {
        self.max_seg
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    /// Score of a scheme under this table: `-Σ penalty`, accumulated in
    /// segment order exactly as the DP does.
    pub fn score(&self, scheme: &Scheme) -> Result<f64> {
        scheme.check_frames(self.frames)?;
        let mut acc = 0.0;
        for (start, len) in scheme.spans() {
            let cost = self.get(start + len, len).ok_or_else(|| {
                invalid!("segment of length {len} exceeds table cap {}", self.max_seg)
            })?;
            acc -= cost;
        }
        Ok(acc)
    }
}

/// Cohesion cost table for the default objective.
pub fn precompute_costs(h: &FeatureSequence, max_seg: usize) -> Result<CostTable> {
    CostTable::build(h, max_seg, Objective::Jh)
}

/// `J_h = -Σ_i L(σ_i + s_i - 1, s_i)`.
pub fn objective_jh(h: &FeatureSequence, scheme: &Scheme) -> Result<f64> {
    scheme.check_frames(h.frames())?;
    let mut acc = 0.0;
    for (start, len) in scheme.spans() {
        acc -= segment_cost(h, start + len, len)?;
    }
    Ok(acc)
}

/// Minus the summed per-frame L2 distance between `h` and its segment-mean
/// reconstruction.
pub fn objective_l2(h: &FeatureSequence, scheme: &Scheme) -> Result<f64> {
    scheme.check_frames(h.frames())?;
    let mut acc = 0.0;
    for (start, len) in scheme.spans() {
        acc -= l2_penalty(h, start, len);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineScore {
    /// Σ_t cos(h_t, h'_t).
    pub value: f64,
    /// Frames whose cosine was undefined (zero norm) and counted as 0.
    pub zero_norm_frames: usize,
}

pub fn objective_cosine(h: &FeatureSequence, scheme: &Scheme) -> Result<CosineScore> {
    scheme.check_frames(h.frames())?;
    let mut zero_norm_frames = 0;
    let mut acc = 0.0;
    for (start, len) in scheme.spans() {
        acc -= -cosine_gain(h, start, len, &mut zero_norm_frames);
    }
    if zero_norm_frames > 0 {
        log::warn!("cosine objective: {zero_norm_frames} zero-norm frame(s) scored as 0");
    }
    Ok(CosineScore {
        value: acc,
        zero_norm_frames,
    })
}

/// Score of `scheme` under any objective, on the same scale the scheduler
/// maximises.
pub fn evaluate(h: &FeatureSequence, scheme: &Scheme, objective: Objective) -> Result<f64> {
    match objective {
        Objective::Jh => objective_jh(h, scheme),
        Objective::L2 => objective_l2(h, scheme),
        Objective::Cosine => objective_cosine(h, scheme).map(|c| c.value),
    }
}

/// Phone transition points from an external aligner. A boundary `t` sits
/// between 1-based frames `t` and `t + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct PhoneBoundaries {
    frames: Vec<usize>,
}

impl PhoneBoundaries {
    pub fn new(frames: Vec<usize>, total_frames: usize) -> Result<Self> {
        for (i, &b) in frames.iter().enumerate() {
            if b == 0 || b >= total_frames {
                return Err(invalid!(
                    "phone boundary {b} outside 1..={}",
                    total_frames.saturating_sub(1)
                ));
            }
            if i > 0 && frames[i - 1] >= b {
                return Err(invalid!("phone boundaries must be strictly increasing"));
            }
        }
        Ok(Self { frames })
    }

    /// Parses a JSON array of integers.
    pub fn from_json(text: &str, total_frames: usize) -> Result<Self> {
        let frames: Vec<usize> =
            serde_json::from_str(text).map_err(|e| invalid!("phone boundaries JSON: {e}"))?;
        Self::new(frames, total_frames)
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }
}

/// Number of phone boundaries that fall strictly inside a segment.
pub fn alignment_cost(scheme: &Scheme, boundaries: &PhoneBoundaries) -> Result<f64> {
    if let Some(&last) = boundaries.frames.last() {
        if last >= scheme.frames() {
            return Err(invalid!(
                "phone boundary {last} outside 1..={}",
                scheme.frames().saturating_sub(1)
            ));
        }
    }
    let mut split = 0usize;
    let mut bounds = boundaries.frames.iter().peekable();
    for (start, len) in scheme.spans() {
        let end = start + len;
        while let Some(&&b) = bounds.peek() {
            if b >= end {
                break;
            }
            if b > start {
                split += 1;
            }
            bounds.next();
        }
    }
    Ok(split as f64)
}
