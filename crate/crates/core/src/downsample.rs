//! Frame-averaged downsampling.
//!
//! A scheme collapses each segment to the mean of its frames. The compact
//! form keeps one row per segment (`T' × d`); the expanded form writes the
//! mean back over every frame of the segment (`T × d`).
//!
//! Outputs keep the source sequence's frame rate in their metadata.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::features::FeatureSequence;
use crate::scheme::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DownsampleMode {
    #[default]
    Compact,
    Expanded,
}

impl FromStr for DownsampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "compact" => Ok(Self::Compact),
            "expanded" => Ok(Self::Expanded),
            other => Err(invalid!(
                "unknown downsample mode `{other}` (compact|expanded)"
            )),
        }
    }
}

impl fmt::Display for DownsampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Compact => "compact",
            Self::Expanded => "expanded",
        })
    }
}

/// Mean of frames `start..start + len`, summed in frame order.
pub(crate) fn segment_mean(h: &FeatureSequence, start: usize, len: usize) -> Vec<f32> {
    let mut acc = vec![0.0f32; h.dim()];
    for t in start..start + len {
        for (a, &v) in acc.iter_mut().zip(h.row(t)) {
            *a += v;
        }
    }
    let n = len as f32;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// One row per segment, each the mean of that segment's frames.
pub fn downsample_compact(h: &FeatureSequence, scheme: &Scheme) -> Result<FeatureSequence> {
    scheme.check_frames(h.frames())?;
    let mut data = Vec::with_capacity(scheme.len() * h.dim());
    for (start, len) in scheme.spans() {
        data.extend(segment_mean(h, start, len));
    }
    FeatureSequence::new(data, scheme.len(), h.dim(), h.base_rate_hz())
}

/// Same length as the input; every frame replaced by its segment mean.
pub fn downsample_expanded(h: &FeatureSequence, scheme: &Scheme) -> Result<FeatureSequence> {
    scheme.check_frames(h.frames())?;
    let mut data = Vec::with_capacity(h.frames() * h.dim());
    for (start, len) in scheme.spans() {
        let mean = segment_mean(h, start, len);
        for _ in 0..len {
            data.extend_from_slice(&mean);
        }
    }
    FeatureSequence::new(data, h.frames(), h.dim(), h.base_rate_hz())
}

/// Loop-free formulation over whole buffers: build the frame→segment index,
/// scatter-add rows into per-segment sums, divide by lengths, and gather back
/// for the expanded form.
///
/// The scatter pass walks frames in order, so results are deterministic and
/// agree with the per-segment path.
pub fn downsample_fast(
    h: &FeatureSequence,
    scheme: &Scheme,
    mode: DownsampleMode,
) -> Result<FeatureSequence> {
    scheme.check_frames(h.frames())?;
    let dim = h.dim();
    let ids = scheme.segment_ids();

    let mut sums = vec![0.0f32; scheme.len() * dim];
    for (row, &seg) in h.as_slice().chunks_exact(dim).zip(&ids) {
        for (acc, &v) in sums[seg * dim..(seg + 1) * dim].iter_mut().zip(row) {
            *acc += v;
        }
    }

    for (chunk, &len) in sums.chunks_exact_mut(dim).zip(scheme.segments()) {
        let n = len as f32;
        chunk.iter_mut().for_each(|v| *v /= n);
    }

    match mode {
        DownsampleMode::Compact => FeatureSequence::new(sums, scheme.len(), dim, h.base_rate_hz()),
        DownsampleMode::Expanded => {
            let mut out = Vec::with_capacity(h.frames() * dim);
            for &seg in &ids {
                out.extend_from_slice(&sums[seg * dim..(seg + 1) * dim]);
            }
            FeatureSequence::new(out, h.frames(), dim, h.base_rate_hz())
        }
    }
}

pub fn downsample(
    h: &FeatureSequence,
    scheme: &Scheme,
    mode: DownsampleMode,
) -> Result<FeatureSequence> {
    match mode {
        DownsampleMode::Compact => downsample_compact(h, scheme),
        DownsampleMode::Expanded => downsample_expanded(h, scheme),
    }
}

/// Repeats each compact row by its segment length.
pub fn expand_compact(rows: &FeatureSequence, scheme: &Scheme) -> Result<FeatureSequence> {
    if rows.frames() != scheme.len() {
        return Err(invalid!(
            "{} compact rows for a {}-segment scheme",
            rows.frames(),
            scheme.len()
        ));
    }
    let mut data = Vec::with_capacity(scheme.frames() * rows.dim());
    for (row, &len) in rows.rows().zip(scheme.segments()) {
        for _ in 0..len {
            data.extend_from_slice(row);
        }
    }
    FeatureSequence::new(data, scheme.frames(), rows.dim(), rows.base_rate_hz())
}

/// Builds a scheme over `frames` whose segment-length histogram follows
/// `proportions` (index `k - 1` is the share of length-`k` segments), then
/// shuffles segment order with `rng`.
///
/// Counts come from largest-remainder rounding of the expected segment count.
/// Any frame surplus or deficit is then repaired one frame at a time, picking
/// whichever edit (add/remove a 1-frame segment, or grow/shrink one segment by
/// a frame) keeps the histogram closest to the fractional targets. On ties the
/// 1-frame edits win.
pub fn scheme_from_proportions_with_rng<R: Rng + ?Sized>(
    proportions: &[f64],
    frames: usize,
    max_seg: usize,
    rng: &mut R,
) -> Result<Scheme> {
    if frames == 0 {
        return Err(invalid!("cannot build a scheme for 0 frames"));
    }
    if max_seg == 0 || proportions.len() != max_seg {
        return Err(invalid!(
            "expected {max_seg} proportions, got {}",
            proportions.len()
        ));
    }
    if proportions.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid!("proportions must be finite and non-negative"));
    }
    let total: f64 = proportions.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(invalid!("proportions must sum to 1, got {total}"));
    }
    if proportions
        .iter()
        .take(frames.min(max_seg))
        .all(|&p| p == 0.0)
    {
        log::warn!(
            "all proportion mass is on lengths above {frames} frames; clipping to a single segment"
        );
    }

    let mean_len: f64 = proportions
        .iter()
        .enumerate()
        .map(|(k, p)| (k + 1) as f64 * p)
        .sum();
    let n_segments = ((frames as f64 / mean_len).round() as usize).clamp(1, frames);
    let targets: Vec<f64> = proportions.iter().map(|p| p * n_segments as f64).collect();
    let mut counts = largest_remainder(&targets, n_segments);

    let deviation = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .zip(&targets)
            .map(|(&c, &t)| (c as f64 - t).abs())
            .sum()
    };

    let mut covered: usize = counts.iter().enumerate().map(|(k, c)| (k + 1) * c).sum();
    while covered != frames {
        // candidate edits as (from length, to length); 0 means "no segment"
        let grow = covered < frames;
        let mut best: Option<((usize, usize), f64)> = None;
        let candidates = if grow {
            (0..max_seg).map(|k| (k, k + 1)).collect::<Vec<_>>()
        } else {
            (1..=max_seg).map(|k| (k, k - 1)).collect::<Vec<_>>()
        };
        for (from, to) in candidates {
            if from > 0 && counts[from - 1] == 0 {
                continue;
            }
            let mut trial = counts.clone();
            if from > 0 {
                trial[from - 1] -= 1;
            }
            if to > 0 {
                trial[to - 1] += 1;
            }
            if trial.iter().all(|&c| c == 0) {
                continue;
            }
            let dev = deviation(&trial);
            if best.is_none_or(|(_, b)| dev < b) {
                best = Some(((from, to), dev));
            }
        }
        let ((from, to), _) = best.expect("a repair edit always exists");
        if from > 0 {
            counts[from - 1] -= 1;
        }
        if to > 0 {
            counts[to - 1] += 1;
        }
        if grow {
            covered += 1;
        } else {
            covered -= 1;
        }
    }

    let mut segments: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k + 1, c))
        .collect();
    segments.shuffle(rng);
    Scheme::new(segments, max_seg)
}

/// Seeded convenience wrapper around [`scheme_from_proportions_with_rng`].
pub fn scheme_from_proportions(
    proportions: &[f64],
    frames: usize,
    max_seg: usize,
    seed: u64,
) -> Result<Scheme> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scheme_from_proportions_with_rng(proportions, frames, max_seg, &mut rng)
}

/// Integer counts summing to `total`, flooring each target and handing the
/// remainder to the largest fractional parts (lower index wins ties).
fn largest_remainder(targets: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}
