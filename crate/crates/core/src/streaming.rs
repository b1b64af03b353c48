//! Chunked scheduling for streaming input.
//!
//! The input is cut into fixed-length chunks that overlap by a few frames.
//! Each chunk is scheduled on its own; frames in an overlap belong to the
//! earlier chunk, so every frame is emitted exactly once and the per-chunk
//! schemes concatenate into one global scheme.
//!
//! Frame counts are derived from milliseconds as `floor(ms · rate / 1000)`.
//! Chunk ranges are 0-based and half-open.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::features::FeatureSequence;
use crate::objective::CostTable;
use crate::scheduler::{check_feasible, solve_pruned, SchedulerParams};
use crate::scheme::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub chunk_ms: f64,
    pub overlap_ms: f64,
    pub context_ms: f64,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            chunk_ms: 500.0,
            overlap_ms: 50.0,
            context_ms: 3000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// First frame of the input window including left context.
    pub context_start: usize,
    pub start: usize,
    pub end: usize,
    /// Leading frames shared with the previous chunk (0 for the first).
    pub overlap: usize,
}

impl Chunk {
    /// Frames this chunk is responsible for emitting.
    pub fn emit_range(&self) -> (usize, usize) {
        (self.start + self.overlap, self.end)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub chunks: Vec<Chunk>,
    pub frames: usize,
    pub chunk_frames: usize,
    pub overlap_frames: usize,
    pub context_frames: usize,
    pub config: ChunkConfig,
}

fn ms_to_frames(ms: f64, rate_hz: f64) -> usize {
    (ms * rate_hz / 1000.0).floor() as usize
}

pub fn chunk_plan(frames: usize, base_rate_hz: f64, config: ChunkConfig) -> Result<ChunkPlan> {
    if frames == 0 {
        return Err(invalid!("cannot plan chunks for 0 frames"));
    }
    if !(base_rate_hz.is_finite() && base_rate_hz > 0.0) {
        return Err(invalid!(
            "base frame rate must be positive, got {base_rate_hz}"
        ));
    }
    for (name, v) in [
        ("chunk", config.chunk_ms),
        ("overlap", config.overlap_ms),
        ("context", config.context_ms),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid!(
                "{name} length must be a non-negative duration, got {v} ms"
            ));
        }
    }
    let chunk_frames = ms_to_frames(config.chunk_ms, base_rate_hz);
    let overlap_frames = ms_to_frames(config.overlap_ms, base_rate_hz);
    let context_frames = ms_to_frames(config.context_ms, base_rate_hz);
    if chunk_frames <= overlap_frames {
        return Err(invalid!(
            "chunk of {chunk_frames} frames must exceed overlap of {overlap_frames} frames"
        ));
    }
    let stride = chunk_frames - overlap_frames;

    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + chunk_frames).min(frames);
        chunks.push(Chunk {
            context_start: start.saturating_sub(context_frames),
            start,
            end,
            overlap: if chunks.is_empty() { 0 } else { overlap_frames },
        });
        if end == frames {
            break;
        }
        start += stride;
    }

    Ok(ChunkPlan {
        chunks,
        frames,
        chunk_frames,
        overlap_frames,
        context_frames,
        config,
    })
}

/// Schedules each chunk's emitted frames independently and joins the
/// results.
///
/// Each chunk targets `ceil(emitted / R_S)` segments. A chunk that cannot be
/// covered at that target falls back to single-frame segments. Segment costs
/// depend only on frames inside a segment, so left context does not change
/// any chunk's result.
pub fn stream_schedule(
    h: &FeatureSequence,
    params: &SchedulerParams,
    plan: &ChunkPlan,
) -> Result<Scheme> {
    if plan.frames != h.frames() {
        return Err(invalid!(
            "chunk plan covers {} frames, sequence has {}",
            plan.frames,
            h.frames()
        ));
    }
    let parts: Vec<Vec<usize>> = plan
        .chunks
        .par_iter()
        .enumerate()
        .map(|(idx, chunk)| {
            let (start, end) = chunk.emit_range();
            let window = h.slice(start, end)?;
            let n = window.frames();
            let target = params.target_length(n);
            if check_feasible(n, target, params.max_seg).is_err() {
                log::warn!(
                    "chunk {idx} ({n} frames, target {target}) infeasible with U = {}; \
                     emitting single-frame segments",
                    params.max_seg
                );
                return Ok(vec![1; n]);
            }
            let costs = CostTable::build(&window, params.max_seg, params.objective)?;
            Ok(solve_pruned(&costs, target)?.scheme.into_segments())
        })
        .collect::<Result<_>>()?;
    Scheme::new(parts.concat(), params.max_seg)
}

/// Joins two sample buffers, blending `overlap` samples with a linear ramp
/// running from all-`a` to all-`b` (both endpoints included).
pub fn crossfade(a: &[f32], b: &[f32], overlap: usize) -> Result<Vec<f32>> {
    if overlap > a.len() || overlap > b.len() {
        return Err(invalid!(
            "overlap of {overlap} samples exceeds input lengths {} / {}",
            a.len(),
            b.len()
        ));
    }
    let head = a.len() - overlap;
    let mut out = Vec::with_capacity(a.len() + b.len() - overlap);
    out.extend_from_slice(&a[..head]);
    for t in 0..overlap {
        let w = if overlap == 1 {
            0.5
        } else {
            t as f64 / (overlap - 1) as f64
        };
        let mixed = (1.0 - w) * a[head + t] as f64 + w * b[t] as f64;
        out.push(mixed as f32);
    }
    out.extend_from_slice(&b[overlap..]);
    Ok(out)
}
