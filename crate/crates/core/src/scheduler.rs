//! Dynamic-programming downsample scheduler.
//!
//! Given a per-segment penalty table, find the scheme with exactly `T'`
//! segments of length `1..=U` that maximises `-Σ penalty`. The table is
//! `d[j][i]`: best score for covering the first `j` frames with `i`
//! segments; `prev[j][i]` remembers the length of the last segment.
//!
//! Two fill orders are provided. The vanilla fill walks `(j, i, s)` and
//! touches every cell. The pruned fill walks `(i, s, j)` and only visits the
//! `j` for which the cell can be both reached from the start and completed
//! to `(T, T')`:
//!
//! ```text
//! j ∈ [max(i, s, T - (T' - i)·U), min(T, (i - 1)·U + s, T - (T' - i))]
//! ```
//!
//! Candidates for a cell are always considered in ascending `s` and only a
//! strictly better score replaces the incumbent, so both fills pick the
//! shortest segment among equal-scoring choices and return identical schemes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::features::FeatureSequence;
use crate::objective::{CostTable, Objective};
use crate::scheme::Scheme;

/// Target downsampling ratio, segment cap and objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerParams {
    pub ratio: f64,
    pub max_seg: usize,
    pub objective: Objective,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self {
            ratio: 2.0,
            max_seg: 4,
            objective: Objective::Jh,
        }
    }
}

impl SchedulerParams {
    pub fn new(ratio: f64, max_seg: usize, objective: Objective) -> Result<Self> {
        if !(ratio.is_finite() && ratio >= 1.0) {
            return Err(invalid!("downsampling ratio must be >= 1, got {ratio}"));
        }
        if max_seg == 0 {
            return Err(invalid!("segment cap U must be at least 1"));
        }
        Ok(Self {
            ratio,
            max_seg,
            objective,
        })
    }

    pub fn target_length(&self, frames: usize) -> usize {
        target_length(frames, self.ratio)
    }
}

/// `T' = ceil(T / R_S)`.
pub fn target_length(frames: usize, ratio: f64) -> usize {
    (frames as f64 / ratio).ceil() as usize
}

pub fn check_feasible(frames: usize, target: usize, max_seg: usize) -> Result<()> {
    if max_seg == 0 {
        return Err(invalid!("segment cap U must be at least 1"));
    }
    if target == 0 || target > frames || frames > target.saturating_mul(max_seg) {
        return Err(Error::Infeasible {
            frames,
            target,
            max_seg,
        });
    }
    Ok(())
}

/// A scheme together with its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub scheme: Scheme,
    pub score: f64,
}

/// Score and back-pointer tables, `(T + 1) × (T' + 1)`.
#[derive(Debug, Clone)]
pub struct DpTables {
    score: Vec<f64>,
    prev: Vec<u32>,
    frames: usize,
    target: usize,
    visited: u64,
}

impl DpTables {
    fn new(frames: usize, target: usize) -> Self {
        let cells = (frames + 1) * (target + 1);
        let mut score = vec![f64::NEG_INFINITY; cells];
        score[0] = 0.0;
        Self {
            score,
            prev: vec![0; cells],
            frames,
            target,
            visited: 0,
        }
    }

    #[inline]
    fn idx(&self, j: usize, i: usize) -> usize {
        j * (self.target + 1) + i
    }

    /// `d[j][i]`, or `None` while the cell is unreached.
    pub fn score(&self, j: usize, i: usize) -> Option<f64> {
        let v = self.score[self.idx(j, i)];
        (v != f64::NEG_INFINITY).then_some(v)
    }

    /// Length of the last segment on the best path into `(j, i)`; 0 if none.
    pub fn prev(&self, j: usize, i: usize) -> usize {
        self.prev[self.idx(j, i)] as usize
    }

    /// Number of `(j, i, s)` candidates examined during the fill.
    pub fn visited(&self) -> u64 {
        self.visited
    }

    #[inline]
    fn relax(&mut self, costs: &CostTable, j: usize, i: usize, s: usize) {
        self.visited += 1;
        let from = self.score[self.idx(j - s, i - 1)];
        // unreached predecessors never enter arithmetic
        if from == f64::NEG_INFINITY {
            return;
        }
        let candidate = from - costs.at(j, s);
        let cell = self.idx(j, i);
        if candidate > self.score[cell] {
            self.score[cell] = candidate;
            self.prev[cell] = s as u32;
        }
    }

    pub fn fill_vanilla(costs: &CostTable, target: usize) -> Self {
        let (frames, max_seg) = (costs.frames(), costs.max_seg());
        let mut t = Self::new(frames, target);
        for j in 1..=frames {
            for i in 1..=j.min(target) {
                for s in 1..=max_seg.min(j - i + 1) {
                    t.relax(costs, j, i, s);
                }
            }
        }
        t
    }

    pub fn fill_pruned(costs: &CostTable, target: usize) -> Self {
        let (frames, max_seg) = (costs.frames(), costs.max_seg());
        let mut t = Self::new(frames, target);
        for i in 1..=target {
            for s in 1..=max_seg {
                if let Some((lo, hi)) = pruned_range(frames, target, max_seg, i, s) {
                    for j in lo..=hi {
                        t.relax(costs, j, i, s);
                    }
                }
            }
        }
        t
    }

    /// Walks the back-pointers from `(T, T')` to recover the scheme.
    pub fn backtrace(&self, max_seg: usize) -> Result<Schedule> {
        let score = self
            .score(self.frames, self.target)
            .ok_or(Error::Infeasible {
                frames: self.frames,
                target: self.target,
                max_seg,
            })?;
        let mut segments = vec![0; self.target];
        let mut j = self.frames;
        for i in (1..=self.target).rev() {
            let s = self.prev(j, i);
            debug_assert!(s >= 1 && s <= j);
            segments[i - 1] = s;
            j -= s;
        }
        debug_assert_eq!(j, 0);
        Ok(Schedule {
            scheme: Scheme::new(segments, max_seg)?,
            score,
        })
    }
}

/// Inclusive `j` range worth visiting for segment count `i` and last length
/// `s`, or `None` when empty.
pub fn pruned_range(
    frames: usize,
    target: usize,
    max_seg: usize,
    i: usize,
    s: usize,
) -> Option<(usize, usize)> {
    let remaining = target - i;
    let lo = i
        .max(s)
        .max(frames.saturating_sub(remaining.saturating_mul(max_seg)));
    let hi = frames
        .min((i - 1).saturating_mul(max_seg).saturating_add(s))
        .min(frames - remaining);
    (lo <= hi).then_some((lo, hi))
}

/// State counts for the two fill orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateCounts {
    /// `T · T' · U`, the loop bound of the vanilla fill.
    pub vanilla: u64,
    /// Total length of all pruned `j` intervals.
    pub pruned: u64,
}

impl StateCounts {
    /// Fraction of vanilla states removed by pruning.
    pub fn reduction(&self) -> f64 {
        1.0 - self.pruned as f64 / self.vanilla as f64
    }
}

pub fn count_states(frames: usize, target: usize, max_seg: usize) -> Result<StateCounts> {
    check_feasible(frames, target, max_seg)?;
    let mut pruned = 0u64;
    for i in 1..=target {
        for s in 1..=max_seg {
            if let Some((lo, hi)) = pruned_range(frames, target, max_seg, i, s) {
                pruned += (hi - lo + 1) as u64;
            }
        }
    }
    Ok(StateCounts {
        vanilla: frames as u64 * target as u64 * max_seg as u64,
        pruned,
    })
}

fn check_table(costs: &CostTable, target: usize) -> Result<()> {
    check_feasible(costs.frames(), target, costs.max_seg())?;
    if costs.max_seg() > u32::MAX as usize {
        return Err(invalid!("segment cap {} too large", costs.max_seg()));
    }
    Ok(())
}

/// Vanilla fill over an arbitrary penalty table.
pub fn solve_vanilla(costs: &CostTable, target: usize) -> Result<Schedule> {
    check_table(costs, target)?;
    DpTables::fill_vanilla(costs, target).backtrace(costs.max_seg())
}

/// Pruned fill over an arbitrary penalty table.
pub fn solve_pruned(costs: &CostTable, target: usize) -> Result<Schedule> {
    check_table(costs, target)?;
    DpTables::fill_pruned(costs, target).backtrace(costs.max_seg())
}

/// Best `J_h` scheme with `target` segments, vanilla fill.
pub fn schedule_vanilla(h: &FeatureSequence, target: usize, max_seg: usize) -> Result<Schedule> {
    check_feasible(h.frames(), target, max_seg)?;
    solve_vanilla(&CostTable::build(h, max_seg, Objective::Jh)?, target)
}

/// Best `J_h` scheme with `target` segments, pruned fill.
pub fn schedule_pruned(h: &FeatureSequence, target: usize, max_seg: usize) -> Result<Schedule> {
    check_feasible(h.frames(), target, max_seg)?;
    solve_pruned(&CostTable::build(h, max_seg, Objective::Jh)?, target)
}

/// Schedules `h` at ratio `params.ratio` under the chosen objective.
pub fn schedule(h: &FeatureSequence, params: &SchedulerParams) -> Result<Schedule> {
    let target = params.target_length(h.frames());
    check_feasible(h.frames(), target, params.max_seg)?;
    let costs = CostTable::build(h, params.max_seg, params.objective)?;
    solve_pruned(&costs, target)
}

/// Same as [`schedule`] but with the vanilla fill.
pub fn schedule_with_vanilla(h: &FeatureSequence, params: &SchedulerParams) -> Result<Schedule> {
    let target = params.target_length(h.frames());
    check_feasible(h.frames(), target, params.max_seg)?;
    let costs = CostTable::build(h, params.max_seg, params.objective)?;
    solve_vanilla(&costs, target)
}
