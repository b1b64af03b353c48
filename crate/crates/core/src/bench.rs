//! Timing and state-count harness for the scheduler and downsampler.
//!
//! Wall-clock numbers are reported only. Each run cross-checks its two
//! implementations and fails if they disagree.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::downsample::{downsample_expanded, downsample_fast, DownsampleMode};
use crate::error::{invalid, Error, Result};
use crate::features::FeatureSequence;
use crate::objective::precompute_costs;
use crate::scheduler::{check_feasible, count_states, solve_pruned, solve_vanilla};
use crate::scheme::Scheme;

/// Standard-normal features.
pub fn random_features<R: Rng + ?Sized>(
    frames: usize,
    dim: usize,
    rng: &mut R,
) -> Result<FeatureSequence> {
    let data = (0..frames * dim)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    FeatureSequence::new(data, frames, dim, 80.0)
}

/// Segment lengths drawn uniformly from `1..=max_seg`, the last one clipped.
pub fn random_scheme<R: Rng + ?Sized>(
    frames: usize,
    max_seg: usize,
    rng: &mut R,
) -> Result<Scheme> {
    if max_seg == 0 {
        return Err(invalid!("segment cap U must be at least 1"));
    }
    let mut segments = Vec::new();
    let mut left = frames;
    while left > 0 {
        let s = rng.random_range(1..=max_seg).min(left);
        segments.push(s);
        left -= s;
    }
    Scheme::new(segments, max_seg)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct DpBenchReport {
    pub frames: usize,
    pub target: usize,
    pub max_seg: usize,
    pub dim: usize,
    /// Per trial, cost table precomputation shared by both variants.
    pub costs_ms: Vec<f64>,
    /// Per trial, table fill and back-trace.
    pub vanilla_ms: Vec<f64>,
    pub pruned_ms: Vec<f64>,
    pub vanilla_states: u64,
    pub pruned_states: u64,
    pub state_reduction: f64,
}

impl DpBenchReport {
    pub fn mean_vanilla_ms(&self) -> f64 {
        mean(&self.vanilla_ms)
    }

    pub fn mean_pruned_ms(&self) -> f64 {
        mean(&self.pruned_ms)
    }
}

impl fmt::Display for DpBenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "DP scheduler  T={} T'={} U={} d={} trials={}",
            self.frames,
            self.target,
            self.max_seg,
            self.dim,
            self.vanilla_ms.len()
        )?;
        writeln!(f, "{:<10} {:>14} {:>12}", "variant", "states", "mean ms")?;
        writeln!(
            f,
            "{:<10} {:>14} {:>12.3}",
            "vanilla",
            self.vanilla_states,
            self.mean_vanilla_ms()
        )?;
        writeln!(
            f,
            "{:<10} {:>14} {:>12.3}",
            "pruned",
            self.pruned_states,
            self.mean_pruned_ms()
        )?;
        writeln!(f, "cost table: {:.3} ms", mean(&self.costs_ms))?;
        write!(f, "state reduction: {:.1}%", self.state_reduction * 100.0)
    }
}

/// Times both fills on the same random features and checks they agree.
pub fn bench_dp(
    frames: usize,
    target: usize,
    max_seg: usize,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<DpBenchReport> {
    check_feasible(frames, target, max_seg)?;
    if dim == 0 || trials == 0 {
        return Err(invalid!("dim and trials must be positive"));
    }
    let counts = count_states(frames, target, max_seg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut costs_ms = Vec::with_capacity(trials);
    let mut vanilla_ms = Vec::with_capacity(trials);
    let mut pruned_ms = Vec::with_capacity(trials);
    for trial in 0..trials {
        let h = random_features(frames, dim, &mut rng)?;

        let t0 = Instant::now();
        let costs = precompute_costs(&h, max_seg)?;
        costs_ms.push(elapsed_ms(t0));

        let t0 = Instant::now();
        let vanilla = solve_vanilla(&costs, target)?;
        vanilla_ms.push(elapsed_ms(t0));

        let t0 = Instant::now();
        let pruned = solve_pruned(&costs, target)?;
        pruned_ms.push(elapsed_ms(t0));

        if vanilla.score != pruned.score || vanilla.scheme != pruned.scheme {
            return Err(Error::Verification(format!(
                "trial {trial}: vanilla score {} vs pruned {}",
                vanilla.score, pruned.score
            )));
        }
    }
    Ok(DpBenchReport {
        frames,
        target,
        max_seg,
        dim,
        costs_ms,
        vanilla_ms,
        pruned_ms,
        vanilla_states: counts.vanilla,
        pruned_states: counts.pruned,
        state_reduction: counts.reduction(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DownsampleBenchReport {
    pub frames: usize,
    pub dim: usize,
    pub max_seg: usize,
    pub fast_ms: Vec<f64>,
    pub naive_ms: Vec<f64>,
    pub max_rel_err: f64,
}

impl DownsampleBenchReport {
    pub fn mean_fast_ms(&self) -> f64 {
        mean(&self.fast_ms)
    }

    pub fn mean_naive_ms(&self) -> f64 {
        mean(&self.naive_ms)
    }
}

impl fmt::Display for DownsampleBenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "downsampling  T={} d={} U={} trials={}",
            self.frames,
            self.dim,
            self.max_seg,
            self.fast_ms.len()
        )?;
        writeln!(f, "{:<10} {:>12}", "variant", "mean ms")?;
        writeln!(f, "{:<10} {:>12.3}", "fast", self.mean_fast_ms())?;
        writeln!(f, "{:<10} {:>12.3}", "naive", self.mean_naive_ms())?;
        let ratio = self.mean_naive_ms() / self.mean_fast_ms().max(f64::MIN_POSITIVE);
        writeln!(f, "speedup: {ratio:.2}x")?;
        write!(f, "max relative error: {:.3e}", self.max_rel_err)
    }
}

/// Largest element-wise `|a - b| / max(|a|, |b|)`, 0 where both are equal.
pub fn max_relative_error(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let (x, y) = (x as f64, y as f64);
            if x == y {
                0.0
            } else {
                (x - y).abs() / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}

pub const DOWNSAMPLE_TOLERANCE: f64 = 1e-6;

/// Times the scatter/gather downsampler against the per-segment loop on
/// random schemes.
pub fn bench_downsample(
    frames: usize,
    dim: usize,
    max_seg: usize,
    trials: usize,
    seed: u64,
) -> Result<DownsampleBenchReport> {
    if frames == 0 || dim == 0 || max_seg == 0 || trials == 0 {
        return Err(invalid!("T, d, U and trials must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fast_ms = Vec::with_capacity(trials);
    let mut naive_ms = Vec::with_capacity(trials);
    let mut max_rel_err = 0.0f64;
    for _ in 0..trials {
        let h = random_features(frames, dim, &mut rng)?;
        let scheme = random_scheme(frames, max_seg, &mut rng)?;

        let t0 = Instant::now();
        let fast = downsample_fast(&h, &scheme, DownsampleMode::Expanded)?;
        fast_ms.push(elapsed_ms(t0));

        let t0 = Instant::now();
        let naive = downsample_expanded(&h, &scheme)?;
        naive_ms.push(elapsed_ms(t0));

        max_rel_err = max_rel_err.max(max_relative_error(fast.as_slice(), naive.as_slice()));
    }
    if max_rel_err > DOWNSAMPLE_TOLERANCE {
        return Err(Error::Verification(format!(
            "fast and naive downsampling differ by {max_rel_err:.3e} (limit {DOWNSAMPLE_TOLERANCE:e})"
        )));
    }
    Ok(DownsampleBenchReport {
        frames,
        dim,
        max_seg,
        fast_ms,
        naive_ms,
        max_rel_err,
    })
}
