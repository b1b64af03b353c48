//! Curriculum sampler for segment-length proportions.
//!
//! Each call either skips downsampling (probability `rho`) or draws a
//! proportion vector over lengths `1..=U` from a Dirichlet whose mean moves
//! from "all single frames" towards `p_tgt` as training progresses, and whose
//! concentration decays once the target has been reached.

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::downsample::scheme_from_proportions_with_rng;
use crate::error::{invalid, Result};
use crate::scheme::Scheme;

/// Decay exponent applied to the concentration past `S_p`.
pub const CONCENTRATION_DECAY: f64 = 2.5;

/// Default probability of bypassing downsampling when emitting fine-tuning
/// manifests.
pub const COOL_BYPASS_PROB: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeltConfig {
    #[serde(rename = "U")]
    pub max_seg: usize,
    /// Steps until the blend reaches `p_tgt`.
    #[serde(rename = "S_p")]
    pub target_steps: u64,
    #[serde(rename = "p_tgt")]
    pub target_mix: Vec<f64>,
    #[serde(rename = "c")]
    pub concentration: f64,
    pub epsilon: f64,
    /// Probability of returning no proportions at all.
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MeltConfig {
    fn default() -> Self {
        Self {
            max_seg: 4,
            target_steps: 100_000,
            target_mix: vec![0.1, 0.45, 0.25, 0.2],
            concentration: 30.0,
            epsilon: 1e-6,
            rho: 0.5,
            seed: 0,
        }
    }
}

impl MeltConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_seg == 0 {
            return Err(invalid!("U must be at least 1"));
        }
        if self.target_steps == 0 {
            return Err(invalid!("S_p must be positive"));
        }
        if self.target_mix.len() != self.max_seg {
            return Err(invalid!(
                "p_tgt has {} entries, U = {}",
                self.target_mix.len(),
                self.max_seg
            ));
        }
        if self.target_mix.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid!("p_tgt entries must be finite and non-negative"));
        }
        let sum: f64 = self.target_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(invalid!("p_tgt must sum to 1, got {sum}"));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(invalid!("c must be positive"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid!("epsilon must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(invalid!("rho must lie in [0, 1], got {}", self.rho));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid!("melt config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `min(g / S_p, 1)`.
    pub fn progress(&self, step: u64) -> f64 {
        (step as f64 / self.target_steps as f64).min(1.0)
    }

    /// Progress-weighted blend between the all-ones mix and `p_tgt`, clamped
    /// below at `epsilon`. The residual mass goes to length 1.
    pub fn blend(&self, step: u64) -> Vec<f64> {
        let pi = self.progress(step);
        let mut d: Vec<f64> = self.target_mix.iter().map(|p| pi * p).collect();
        d[0] = 1.0 - d[1..].iter().sum::<f64>();
        d.iter_mut().for_each(|v| *v = v.max(self.epsilon));
        d
    }

    /// Dirichlet concentration `d · c / max(1, g / S_p)^2.5`.
    pub fn concentration_at(&self, step: u64) -> Vec<f64> {
        let overshoot = (step as f64 / self.target_steps as f64).max(1.0);
        let scale = self.concentration / overshoot.powf(CONCENTRATION_DECAY);
        self.blend(step).into_iter().map(|d| d * scale).collect()
    }
}

/// `ln X` for `X ~ Gamma(shape, 1)`.
///
/// Small shapes are boosted: `X = Y · U^(1/shape)` with `Y ~ Gamma(shape + 1)`,
/// evaluated in log space so draws with shape around 1e-5 do not underflow.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("positive shape");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape");
        let y: f64 = g.sample(rng);
        let u: f64 = Open01.sample(rng);
        y.ln() + u.ln() / shape
    }
}

/// One Dirichlet draw via normalised Gamma variates.
///
/// Normalisation happens in log space; components that would round to zero
/// are floored at the smallest normal `f64` so every entry stays positive.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| ln_gamma_draw(a, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights
        .into_iter()
        .map(|w| (w / total).max(f64::MIN_POSITIVE))
        .collect()
}

/// Proportions for training step `step`, or `None` for the skip branch.
///
/// The skip coin is always drawn first, so a fixed seed gives a fixed
/// skip pattern regardless of `step`.
pub fn melt_sample<R: Rng + ?Sized>(step: u64, cfg: &MeltConfig, rng: &mut R) -> Option<Vec<f64>> {
    let u: f64 = rng.random();
    if u < cfg.rho {
        return None;
    }
    Some(sample_dirichlet(&cfg.concentration_at(step), rng))
}

/// Samples proportions and realises them as a scheme over `frames`.
pub fn melt_scheme<R: Rng + ?Sized>(
    step: u64,
    frames: usize,
    cfg: &MeltConfig,
    rng: &mut R,
) -> Result<Option<Scheme>> {
    if frames == 0 {
        return Err(invalid!("cannot build a scheme for 0 frames"));
    }
    match melt_sample(step, cfg, rng) {
        None => Ok(None),
        Some(p) => scheme_from_proportions_with_rng(&p, frames, cfg.max_seg, rng).map(Some),
    }
}

/// `true` with probability `prob`: skip downsampling for this utterance.
pub fn cool_bypass<R: Rng + ?Sized>(rng: &mut R, prob: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(invalid!(
            "bypass probability must lie in [0, 1], got {prob}"
        ));
    }
    Ok(rng.random::<f64>() < prob)
}

/// A config paired with its own seeded generator.
#[derive(Debug, Clone)]
pub struct MeltSampler {
    cfg: MeltConfig,
    rng: ChaCha8Rng,
}

impl MeltSampler {
    pub fn new(cfg: MeltConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self { cfg, rng })
    }

    /// Independent stream for parallel worker `worker`.
    pub fn for_worker(cfg: MeltConfig, worker: u64) -> Result<Self> {
        let seed = cfg.seed.wrapping_add(worker);
        Self::new(MeltConfig { seed, ..cfg })
    }

    pub fn config(&self) -> &MeltConfig {
        &self.cfg
    }

    pub fn sample(&mut self, step: u64) -> Option<Vec<f64>> {
        melt_sample(step, &self.cfg, &mut self.rng)
    }

    pub fn scheme(&mut self, step: u64, frames: usize) -> Result<Option<Scheme>> {
        melt_scheme(step, frames, &self.cfg, &mut self.rng)
    }

    pub fn bypass(&mut self, prob: f64) -> Result<bool> {
        cool_bypass(&mut self.rng, prob)
    }
}
