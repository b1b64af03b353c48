//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; the process exits non-zero if any fails.
//!
//! Run with `cargo test -p dfrkit --test acceptance`.

// a NaN must fail a check, hence the negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dfrkit::bench::{max_relative_error, random_scheme};
use dfrkit::fsq::FsqSpec;
use dfrkit::meltman::MeltConfig;
use dfrkit::scheduler::{count_states, schedule_pruned, schedule_vanilla, target_length};
use dfrkit::streaming::{chunk_plan, stream_schedule, ChunkConfig};
use dfrkit::{
    bitrate, downsample_expanded, downsample_fast, melt_sample, pack, schedule, unpack,
    DownsampleMode, Objective, SchedulerParams, Scheme, Token, TokenStream,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const DP_SCORE_REL_TOL: f64 = 1e-9;
const STATE_COUNT_REFERENCE: f64 = 672_000.0;
const STATE_COUNT_REL_TOL: f64 = 0.02;
const REDUCTION_REFERENCE: f64 = 0.664;
const REDUCTION_TOL: f64 = 0.01;
const DOWNSAMPLE_REL_TOL: f64 = 1e-6;
const MEAN_REL_TOL: f64 = 1e-6;
const MELT_DRAWS: usize = 10_000;
const MELT_MEAN_TOL: f64 = 0.03;
const MELT_SKIP_TOL: f64 = 0.02;
const MELT_COLD_P1: f64 = 0.99;
const MELT_COLD_SHARE: f64 = 0.95;
const CONTENT_BPS_REFERENCE: f64 = 566.0;
const CONTENT_BPS_TOL: f64 = 1.0;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn dp_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let frames = rng.random_range(1..=12);
        let dim = rng.random_range(1..=4);
        let max_seg = rng.random_range(2..=4);
        let ratio = if rng.random_bool(0.5) { 1.5 } else { 2.0 };
        let target = target_length(frames, ratio);
        let h = random_sequence(&mut rng, frames, dim);
        let best = exhaustive_best(&h, target, max_seg);
        let vanilla = schedule_vanilla(&h, target, max_seg).map_err(|e| e.to_string())?;
        let pruned = schedule_pruned(&h, target, max_seg).map_err(|e| e.to_string())?;
        for (name, s) in [("vanilla", &vanilla), ("pruned", &pruned)] {
            let err = rel_diff(s.score, best).max(rel_diff(jh(&h, s.scheme.segments()), best));
            worst = worst.max(err);
            ensure!(
                err <= DP_SCORE_REL_TOL,
                "case {case} (T={frames}, T'={target}, U={max_seg}): {name} {} vs exhaustive {best}",
                s.score
            );
        }
    }
    Ok(format!(
        "200 instances, max relative gap {worst:.1e} (limit {DP_SCORE_REL_TOL:e})"
    ))
}

fn pruned_equals_vanilla() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..100 {
        let frames: usize = rng.random_range(1..=200);
        let target = rng.random_range(frames.div_ceil(4)..=frames);
        let dim = rng.random_range(1..=16);
        let h = random_sequence(&mut rng, frames, dim);
        let v = schedule_vanilla(&h, target, 4).map_err(|e| e.to_string())?;
        let p = schedule_pruned(&h, target, 4).map_err(|e| e.to_string())?;
        ensure!(
            v.score.to_bits() == p.score.to_bits(),
            "case {case}: score {} vs {}",
            v.score,
            p.score
        );
        ensure!(v.scheme == p.scheme, "case {case}: schemes differ");
    }
    Ok("100 instances, identical scores and schemes".into())
}

fn state_count() -> Check {
    let c = count_states(1000, 500, 4).map_err(|e| e.to_string())?;
    ensure!(c.vanilla == 2_000_000, "vanilla count {}", c.vanilla);
    let dev = (c.pruned as f64 - STATE_COUNT_REFERENCE).abs() / STATE_COUNT_REFERENCE;
    ensure!(
        dev <= STATE_COUNT_REL_TOL,
        "pruned count {} off by {:.2}%",
        c.pruned,
        dev * 100.0
    );
    let red = c.reduction();
    ensure!(
        (red - REDUCTION_REFERENCE).abs() <= REDUCTION_TOL,
        "reduction {:.2}%",
        red * 100.0
    );
    Ok(format!(
        "vanilla {} pruned {} ({:+.2}% vs 672k), reduction {:.1}%",
        c.vanilla,
        c.pruned,
        (c.pruned as f64 / STATE_COUNT_REFERENCE - 1.0) * 100.0,
        red * 100.0
    ))
}

fn fast_equals_naive() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut shapes = vec![(800, 256), (1500, 512), (2560, 1024)];
    for _ in 0..20 {
        shapes.push((rng.random_range(1..=300), rng.random_range(1..=64)));
    }
    let (mut fast_t, mut naive_t) = (Duration::ZERO, Duration::ZERO);
    let mut worst = 0.0f64;
    for (frames, dim) in shapes {
        let h = random_sequence(&mut rng, frames, dim);
        let scheme = random_scheme(frames, 4, &mut rng).map_err(|e| e.to_string())?;
        let t0 = Instant::now();
        let fast =
            downsample_fast(&h, &scheme, DownsampleMode::Expanded).map_err(|e| e.to_string())?;
        fast_t += t0.elapsed();
        let t0 = Instant::now();
        let naive = downsample_expanded(&h, &scheme).map_err(|e| e.to_string())?;
        naive_t += t0.elapsed();
        let err = max_relative_error(fast.as_slice(), naive.as_slice());
        worst = worst.max(err);
        ensure!(
            err <= DOWNSAMPLE_REL_TOL,
            "{frames}x{dim}: relative error {err:e}"
        );
    }
    Ok(format!(
        "23 shapes, max relative error {worst:.1e}, naive/fast time ratio {:.2}",
        naive_t.as_secs_f64() / fast_t.as_secs_f64().max(1e-12)
    ))
}

fn mean_preservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let frames = rng.random_range(1..=400);
        let dim = rng.random_range(1..=32);
        let max_seg = rng.random_range(1..=6);
        let h = random_sequence(&mut rng, frames, dim);
        let scheme = random_scheme(frames, max_seg, &mut rng).map_err(|e| e.to_string())?;
        let out =
            downsample_fast(&h, &scheme, DownsampleMode::Expanded).map_err(|e| e.to_string())?;
        for k in 0..dim {
            let col = |s: &dfrkit::FeatureSequence| -> (f64, f64) {
                let (mut sum, mut abs) = (0.0f64, 0.0f64);
                for r in s.rows() {
                    sum += r[k] as f64;
                    abs += (r[k] as f64).abs();
                }
                (sum / frames as f64, abs / frames as f64)
            };
            let (m_in, scale) = col(&h);
            let (m_out, _) = col(&out);
            // relative to the column's mean magnitude, so near-zero means are not amplified
            let err = (m_out - m_in).abs() / m_in.abs().max(scale).max(1e-12);
            worst = worst.max(err);
            ensure!(
                err <= MEAN_REL_TOL,
                "case {case} dim {k}: mean {m_out} vs {m_in}"
            );
        }
    }
    Ok(format!("100 cases, max relative deviation {worst:.1e}"))
}

fn melt_statistics() -> Check {
    let cfg = MeltConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut sums = vec![0.0f64; cfg.max_seg];
    let mut kept = 0usize;
    for _ in 0..MELT_DRAWS {
        if let Some(p) = melt_sample(cfg.target_steps, &cfg, &mut rng) {
            kept += 1;
            sums.iter_mut().zip(&p).for_each(|(s, v)| *s += v);
        }
    }
    let skip = 1.0 - kept as f64 / MELT_DRAWS as f64;
    ensure!(
        (skip - 0.5).abs() <= MELT_SKIP_TOL,
        "skip fraction {skip:.4}"
    );
    let means: Vec<f64> = sums.iter().map(|s| s / kept as f64).collect();
    for (k, (m, t)) in means.iter().zip(&cfg.target_mix).enumerate() {
        ensure!(
            (m - t).abs() <= MELT_MEAN_TOL,
            "component {k}: mean {m:.4} vs {t}"
        );
    }

    let (mut cold, mut cold_kept) = (0usize, 0usize);
    for _ in 0..MELT_DRAWS {
        if let Some(p) = melt_sample(0, &cfg, &mut rng) {
            cold_kept += 1;
            if p[0] > MELT_COLD_P1 {
                cold += 1;
            }
        }
    }
    let share = cold as f64 / cold_kept as f64;
    ensure!(
        share >= MELT_COLD_SHARE,
        "at step 0 only {:.2}% have p1 > 0.99",
        share * 100.0
    );
    Ok(format!(
        "skip {skip:.3}, mean [{}], step-0 p1>0.99 share {:.1}%",
        means
            .iter()
            .map(|m| format!("{m:.3}"))
            .collect::<Vec<_>>()
            .join(", "),
        share * 100.0
    ))
}

fn bitrate_accounting() -> Check {
    let tokens = (0..400)
        .map(|i| Token {
            code: i * 37 % 18225,
            duration: 2,
        })
        .collect();
    let ts = TokenStream::new(tokens, 18225, 4, 80.0).map_err(|e| e.to_string())?;
    let b = bitrate(&ts).map_err(|e| e.to_string())?;
    let expected_content = 40.0 * (18225f64).log2();
    ensure!(
        (b.content_bps - CONTENT_BPS_REFERENCE).abs() <= CONTENT_BPS_TOL
            && (b.content_bps - expected_content).abs() < 1e-9,
        "content {} bps",
        b.content_bps
    );
    ensure!(b.duration_bps == 80.0, "duration {} bps", b.duration_bps);
    let shown = format!(
        "{:.2} kbps / {:.2} kbps",
        b.content_bps / 1e3,
        b.duration_bps / 1e3
    );
    ensure!(shown == "0.57 kbps / 0.08 kbps", "displayed {shown}");
    Ok(format!(
        "content {:.1} bps, duration {:.1} bps ({shown})",
        b.content_bps, b.duration_bps
    ))
}

fn token_format() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for case in 0..1000 {
        let k: u64 = match case % 4 {
            0 => 1,
            1 => rng.random_range(1..=100_000),
            2 => 1 << rng.random_range(0..40),
            _ => rng.random_range(1..=u64::MAX),
        };
        let u: u8 = rng.random_range(1..=if case % 3 == 0 { 255 } else { 8 });
        let n = rng.random_range(0..300);
        let tokens: Vec<Token> = (0..n)
            .map(|_| Token {
                code: rng.random_range(0..k),
                duration: rng.random_range(1..=u),
            })
            .collect();
        let frames: u64 = tokens.iter().map(|t| t.duration as u64).sum();
        let ts = TokenStream::new(tokens, k, u, 80.0).map_err(|e| e.to_string())?;
        let bytes = pack(&ts);
        let back = unpack(&bytes).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(back == ts, "case {case} (K={k}, U={u}): stream changed");
        ensure!(pack(&back) == bytes, "case {case}: repacked bytes differ");
        ensure!(
            back.frames() == frames,
            "case {case}: {} frames vs {frames}",
            back.frames()
        );
    }
    Ok("1000 streams round-trip bit-exactly".into())
}

fn fsq_bijection() -> Check {
    for spec in [FsqSpec::k18225(), FsqSpec::k84375()] {
        let k = spec.codebook_size();
        let mut digits = vec![0u32; spec.dim()];
        for code in 0..k {
            ensure!(
                spec.compose(&digits).ok() == Some(code),
                "K={k}: compose at {code}"
            );
            ensure!(
                spec.decompose(code).ok().as_deref() == Some(&digits[..]),
                "K={k}: decompose at {code}"
            );
            let lattice = spec.dequantize(code).map_err(|e| e.to_string())?;
            ensure!(
                spec.quantize(&lattice).ok() == Some(code),
                "K={k}: lattice point {code}"
            );
            // odometer, last dimension fastest
            for (d, &l) in digits.iter_mut().zip(spec.levels()).rev() {
                *d += 1;
                if *d < l {
                    break;
                }
                *d = 0;
            }
        }
        ensure!(
            digits.iter().all(|&d| d == 0),
            "K={k}: odometer did not wrap"
        );
        ensure!(spec.decompose(k).is_err(), "K={k}: code K accepted");
        let centre: Vec<u32> = spec.levels().iter().map(|l| l / 2).collect();
        let zero = spec
            .quantize(&vec![0.0; spec.dim()])
            .map_err(|e| e.to_string())?;
        ensure!(
            spec.decompose(zero).ok() == Some(centre),
            "K={k}: zero maps to {zero}"
        );
    }
    Ok("K=18225 and K=84375 exhaustive, zero maps to the central code".into())
}

fn beats_uniform() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut misaligned, mut gain) = (0usize, 0.0f64);
    for case in 0..100 {
        let plateaus = rng.random_range(10..=40);
        let widths: Vec<usize> = (0..plateaus).map(|_| rng.random_range(1..=4)).collect();
        let dim = rng.random_range(1..=8);
        let h = plateau_sequence(&mut rng, &widths, dim);
        let frames = h.frames();
        let params = SchedulerParams::new(2.0, 4, Objective::Jh).map_err(|e| e.to_string())?;
        let dp = schedule(&h, &params).map_err(|e| e.to_string())?;
        let uniform = Scheme::uniform(frames, 2, 4).map_err(|e| e.to_string())?;
        ensure!(
            dp.scheme.len() == uniform.len(),
            "case {case}: lengths differ"
        );
        let (j_dp, j_uni) = (jh(&h, dp.scheme.segments()), jh(&h, uniform.segments()));
        ensure!(
            j_dp >= j_uni - 1e-12,
            "case {case}: DP {j_dp} < uniform {j_uni}"
        );
        let mut edge = 0;
        let odd_boundary = widths[..widths.len() - 1].iter().any(|w| {
            edge += w;
            edge % 2 == 1
        });
        if odd_boundary {
            misaligned += 1;
            ensure!(
                j_dp > j_uni,
                "case {case}: misaligned but DP {j_dp} == uniform {j_uni}"
            );
        }
        gain += j_dp - j_uni;
    }
    Ok(format!(
        "100 sequences, {misaligned} misaligned, all strict; mean J_h gain {:.3}",
        gain / 100.0
    ))
}

fn streaming_reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let params = SchedulerParams::default();
    for case in 0..20 {
        let frames = rng.random_range(1..=200);
        let dim = rng.random_range(1..=8);
        let h = random_sequence(&mut rng, frames, dim);
        let cfg = ChunkConfig {
            chunk_ms: 1000.0 * frames as f64 / 80.0 + 1.0,
            overlap_ms: 0.0,
            context_ms: 3000.0,
        };
        let plan = chunk_plan(frames, 80.0, cfg).map_err(|e| e.to_string())?;
        ensure!(
            plan.chunks.len() == 1,
            "case {case}: {} chunks",
            plan.chunks.len()
        );
        let streamed = stream_schedule(&h, &params, &plan).map_err(|e| e.to_string())?;
        let offline = schedule(&h, &params).map_err(|e| e.to_string())?.scheme;
        ensure!(
            streamed.to_json().as_bytes() == offline.to_json().as_bytes(),
            "case {case}: streamed scheme differs"
        );
    }

    let plan = chunk_plan(960, 80.0, ChunkConfig::default()).map_err(|e| e.to_string())?;
    // 500 ms = 40 frames, 50 ms = 4 frames, stride 36, 3 s context = 240 frames
    let expected: Vec<(usize, usize, usize)> = (0usize..)
        .map(|i| 36 * i)
        .take_while(|&s| s == 0 || s + 4 < 960)
        .map(|s| (s.saturating_sub(240), s, (s + 40).min(960)))
        .collect();
    let got: Vec<(usize, usize, usize)> = plan
        .chunks
        .iter()
        .map(|c| (c.context_start, c.start, c.end))
        .collect();
    ensure!(got == expected, "12 s plan boundaries {got:?}");
    ensure!(
        got.len() == 27 && got[26] == (696, 936, 960),
        "12 s plan tail {:?}",
        got.last()
    );
    let mut covered = vec![0u8; 960];
    for c in &plan.chunks {
        let (a, b) = c.emit_range();
        covered[a..b].iter_mut().for_each(|x| *x += 1);
    }
    ensure!(
        covered.iter().all(|&x| x == 1),
        "emit ranges do not tile the input"
    );
    Ok("20 single-chunk cases identical; 12 s plan has 27 chunks ending 936..960".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("dp optimality", dp_optimality, Duration::from_secs(30)),
        (
            "pruned equals vanilla",
            pruned_equals_vanilla,
            Duration::from_secs(60),
        ),
        ("state count", state_count, Duration::from_secs(1)),
        (
            "fast equals naive downsampling",
            fast_equals_naive,
            Duration::from_secs(60),
        ),
        (
            "mean preservation",
            mean_preservation,
            Duration::from_secs(10),
        ),
        ("melt statistics", melt_statistics, Duration::from_secs(30)),
        (
            "bitrate accounting",
            bitrate_accounting,
            Duration::from_secs(1),
        ),
        ("token format", token_format, Duration::from_secs(30)),
        ("fsq bijection", fsq_bijection, Duration::from_secs(10)),
        ("dp beats uniform", beats_uniform, Duration::from_secs(60)),
        (
            "streaming reduction",
            streaming_reduction,
            Duration::from_secs(10),
        ),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let t0 = Instant::now();
        let outcome = check();
        let took = t0.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > limit => Err(format!("{msg}; took {took:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  {name:<32} {took:>10.2?}  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name:<32} {took:>10.2?}  {msg}");
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
