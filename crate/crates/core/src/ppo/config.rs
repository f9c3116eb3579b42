//! Trainer hyperparameters.

use serde::{Deserialize, Serialize};

use super::loss::LossCoefs;
use crate::error::{Error, Result};

/// Decaying auxiliary reward for intermediate kitchen progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapingConfig {
    pub enabled: bool,
    pub onion_in_pot: f64,
    pub cook_start: f64,
    /// Fraction of training after which shaping is fully off.
    pub decay_fraction: f64,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        ShapingConfig { enabled: true, onion_in_pot: 0.1, cook_start: 0.3, decay_fraction: 1.0 / 3.0 }
    }
}

impl ShapingConfig {
    /// Multiplier at training progress `progress` in `[0, 1]`.
    pub fn coefficient(&self, progress: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        (1.0 - progress / self.decay_fraction).max(0.0)
    }

    pub fn reward(&self, onions_in_pot: u32, cook_starts: u32, progress: f64) -> f64 {
        self.coefficient(progress) * (self.onion_in_pot * onions_in_pot as f64 + self.cook_start * cook_starts as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub lr: f64,
    pub anneal_lr: bool,
    pub warmup_frac: f64,
    pub num_envs: usize,
    pub num_steps: usize,
    pub update_epochs: usize,
    pub num_minibatches: usize,
    pub total_timesteps: u64,
    pub clip_eps: f64,
    pub ent_coef: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub adam_eps: f64,
    /// Length of the contiguous sequences minibatches are cut into.
    pub seq_len: usize,
    /// Sequences per gradient chunk; chunks run on separate lanes.
    pub grad_chunk: usize,
    pub shaping: ShapingConfig,
    /// Treat the horizon as a truncation and bootstrap from the final state's value.
    pub bootstrap_horizon: bool,
    /// Standardise value targets with running return statistics.
    pub normalise_values: bool,
    /// Write a checkpoint every this many updates (0: final only).
    pub checkpoint_every: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            lr: 5e-4,
            anneal_lr: true,
            warmup_frac: 0.05,
            num_envs: 256,
            num_steps: 256,
            update_epochs: 4,
            num_minibatches: 64,
            total_timesteps: 10_000_000,
            clip_eps: 0.2,
            ent_coef: 0.01,
            gamma: 0.99,
            gae_lambda: 0.95,
            vf_coef: 1.0,
            max_grad_norm: 0.25,
            adam_eps: 1e-5,
            seq_len: 256,
            grad_chunk: 4,
            shaping: ShapingConfig::default(),
            bootstrap_horizon: true,
            normalise_values: true,
            checkpoint_every: 0,
        }
    }
}

impl PpoConfig {
    /// Smaller rollouts for single-machine runs; the loss and optimiser settings are unchanged.
    pub fn desk(total_timesteps: u64) -> Self {
        PpoConfig { num_envs: 32, num_steps: 128, num_minibatches: 8, seq_len: 32, grad_chunk: 16, total_timesteps, ..Default::default() }
    }

    pub fn coefs(&self) -> LossCoefs {
        LossCoefs { clip_eps: self.clip_eps, vf_coef: self.vf_coef, ent_coef: self.ent_coef }
    }

    pub fn batch_size(&self) -> usize {
        self.num_envs * self.num_steps
    }

    pub fn num_updates(&self) -> usize {
        (self.total_timesteps as usize).div_ceil(self.batch_size()).max(1)
    }

    pub fn sequences(&self) -> usize {
        self.num_envs * (self.num_steps / self.seq_len)
    }

    pub fn total_grad_steps(&self) -> usize {
        self.num_updates() * self.update_epochs * self.num_minibatches
    }

    /// Learning rate for gradient step `k` of `total`: linear warmup, then linear decay to zero.
    pub fn lr_at(&self, k: usize, total: usize) -> f64 {
        let warm = ((self.warmup_frac * total as f64).ceil() as usize).max(if self.warmup_frac > 0.0 { 1 } else { 0 });
        if k < warm {
            return self.lr * (k + 1) as f64 / warm as f64;
        }
        if !self.anneal_lr {
            return self.lr;
        }
        let rest = (total - warm).max(1) as f64;
        self.lr * (1.0 - (k - warm) as f64 / rest).max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_envs == 0 || self.num_steps == 0 || self.num_minibatches == 0 || self.update_epochs == 0 {
            return bad("rollout and minibatch sizes must be positive".into());
        }
        if !self.batch_size().is_multiple_of(self.num_minibatches) {
            return bad(format!("num_envs * num_steps = {} not divisible by num_minibatches {}", self.batch_size(), self.num_minibatches));
        }
        if self.seq_len == 0 || !self.num_steps.is_multiple_of(self.seq_len) {
            return bad(format!("seq_len {} must divide num_steps {}", self.seq_len, self.num_steps));
        }
        if !self.sequences().is_multiple_of(self.num_minibatches) {
            return bad(format!("{} sequences do not split into {} minibatches", self.sequences(), self.num_minibatches));
        }
        if self.grad_chunk == 0 {
            return bad("grad_chunk must be positive".into());
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda), ("warmup_frac", self.warmup_frac)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.lr > 0.0 && self.clip_eps > 0.0 && self.max_grad_norm > 0.0) {
            return bad("lr, clip_eps and max_grad_norm must be positive".into());
        }
        Ok(())
    }
}
