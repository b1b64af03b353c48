//! Reference implementations shared by the integration tests. They are
//! written directly from the definitions and share no code with the crate.

#![allow(dead_code)]

use dfrkit::FeatureSequence;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_sequence<R: Rng>(rng: &mut R, frames: usize, dim: usize) -> FeatureSequence {
    let data = (0..frames * dim)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    FeatureSequence::new(data, frames, dim, 80.0).unwrap()
}

fn distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Sum over unordered frame pairs of their distance, divided by the length.
pub fn cohesion(h: &FeatureSequence, start: usize, len: usize) -> f64 {
    let mut total = 0.0;
    for a in start..start + len {
        for b in a + 1..start + len {
            total += distance(h.row(a), h.row(b));
        }
    }
    total / len as f64
}

/// `J_h` of a list of segment lengths.
pub fn jh(h: &FeatureSequence, segments: &[usize]) -> f64 {
    let mut start = 0;
    let mut cost = 0.0;
    for &len in segments {
        cost += cohesion(h, start, len);
        start += len;
    }
    assert_eq!(start, h.frames(), "segments must cover the sequence");
    -cost
}

/// Every composition of `frames` into exactly `parts` pieces of size `1..=cap`.
pub fn compositions(frames: usize, parts: usize, cap: usize) -> Vec<Vec<usize>> {
    fn go(left: usize, parts: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for s in 1..=cap.min(left) {
            cur.push(s);
            go(left - s, parts - 1, cap, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(frames, parts, cap, &mut Vec::new(), &mut out);
    out
}

/// Best `J_h` over all feasible schemes.
pub fn exhaustive_best(h: &FeatureSequence, parts: usize, cap: usize) -> f64 {
    compositions(h.frames(), parts, cap)
        .iter()
        .map(|s| jh(h, s))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Relative difference with an absolute floor for values near zero.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Segment means written back to every frame, accumulated in f64.
pub fn expanded_mean_f64(h: &FeatureSequence, segments: &[usize]) -> Vec<f64> {
    let d = h.dim();
    let mut out = Vec::with_capacity(h.frames() * d);
    let mut start = 0;
    for &len in segments {
        let mut acc = vec![0.0f64; d];
        for t in start..start + len {
            for (a, &x) in acc.iter_mut().zip(h.row(t)) {
                *a += x as f64;
            }
        }
        for _ in 0..len {
            out.extend(acc.iter().map(|a| a / len as f64));
        }
        start += len;
    }
    out
}

/// Piecewise-constant sequence: one random vector per plateau.
pub fn plateau_sequence<R: Rng>(rng: &mut R, widths: &[usize], dim: usize) -> FeatureSequence {
    let mut rows = Vec::new();
    for &w in widths {
        let v: Vec<f32> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..w {
            rows.push(v.clone());
        }
    }
    FeatureSequence::from_rows(&rows, 80.0).unwrap()
}
