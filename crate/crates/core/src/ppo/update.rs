//! Clipped policy-gradient update over sequence-preserving minibatches.

use serde::{Deserialize, Serialize};

use super::config::PpoConfig;
use super::gae::compute_gae_batch;
use super::loss::{ppo_loss, LossSums};
use super::rollout::RolloutBatch;
use super::value_norm::ValueNorm;
use crate::error::{Error, Result};
use crate::nn::{Adam, Cache, Policy};
use crate::par::Lanes;
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
    /// Mean global gradient norm before clipping.
    pub grad_norm: f64,
    pub lr: f64,
    pub minibatches: usize,
}

/// Optimiser state carried across updates.
#[derive(Debug, Clone)]
pub struct Learner {
    pub adam: Adam<f32>,
    pub grad_steps: usize,
    pub total_grad_steps: usize,
    pub values: Option<ValueNorm>,
}

impl Learner {
    pub fn new(params: usize, cfg: &PpoConfig) -> Self {
        Learner {
            adam: Adam::new(params, cfg.adam_eps),
            grad_steps: 0,
            total_grad_steps: cfg.total_grad_steps(),
            values: cfg.normalise_values.then(|| ValueNorm::new(VALUE_NORM_BETA)),
        }
    }
}

const VALUE_NORM_BETA: f64 = 0.999;

/// Advantages and critic targets for `batch`. Critic outputs are mapped back
/// to return units first; with `bootstrap_horizon` the value of each
/// episode's final observation is credited to its last reward. Updates the
/// value statistics and returns targets in critic units.
pub fn advantages(batch: &RolloutBatch, cfg: &PpoConfig, norm: Option<&mut ValueNorm>) -> (Vec<f32>, Vec<f32>) {
    let un = |v: f32| norm.as_deref().map_or(v, |n| n.denormalise(v));
    let values: Vec<f32> = batch.values.iter().map(|&v| un(v)).collect();
    let last: Vec<f32> = batch.last_values.iter().map(|&v| un(v)).collect();
    let rewards: Vec<f32> = if cfg.bootstrap_horizon {
        let g = cfg.gamma as f32;
        (0..batch.rewards.len())
            .map(|i| {
                let r = batch.rewards[i];
                match batch.final_values.get(i) {
                    Some(&v) if batch.dones[i] => r + g * un(v),
                    _ => r,
                }
            })
            .collect()
    } else {
        batch.rewards.clone()
    };
    let (adv, mut ret) = compute_gae_batch(&rewards, &values, &batch.dones, &last, batch.steps, batch.envs, cfg.gamma, cfg.gae_lambda);
    if let Some(n) = norm {
        n.update(&ret);
        for r in &mut ret {
            *r = n.normalise(*r);
        }
    }
    (adv, ret)
}

/// Inputs of one minibatch chunk laid out time-major.
struct Chunk {
    obs: Vec<f32>,
    h0: Vec<f32>,
    resets: Vec<bool>,
    actions: Vec<usize>,
    logp: Vec<f32>,
    adv: Vec<f32>,
    ret: Vec<f32>,
    n: usize,
}

/// Scales `g` so its global L2 norm is at most `max_norm`; returns the norm before scaling.
pub fn clip_grad_norm(g: &mut [f32], max_norm: f64) -> f64 {
    let norm = g.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = (max_norm / (norm + 1e-12)) as f32;
        for v in g.iter_mut() {
            *v *= k;
        }
    }
    norm
}

#[allow(clippy::too_many_arguments)]
fn gather(batch: &RolloutBatch, segs: &[usize], seq_len: usize, per_env: usize, adv: &[f32], ret: &[f32], mean: f64, std: f64) -> Chunk {
    let (b, d, hd) = (batch.envs, batch.obs_dim, batch.hidden_dim);
    let n = segs.len();
    let rows = seq_len * n;
    let mut c = Chunk {
        obs: vec![0.0; rows * d],
        h0: vec![0.0; n * hd],
        resets: vec![false; rows],
        actions: vec![0; rows],
        logp: vec![0.0; rows],
        adv: vec![0.0; rows],
        ret: vec![0.0; rows],
        n,
    };
    for (j, &s) in segs.iter().enumerate() {
        let env = s / per_env;
        let start = (s % per_env) * seq_len;
        let src = start * b + env;
        c.h0[j * hd..(j + 1) * hd].copy_from_slice(&batch.hidden[src * hd..(src + 1) * hd]);
        for t in 0..seq_len {
            let i = (start + t) * b + env;
            let r = t * n + j;
            c.obs[r * d..(r + 1) * d].copy_from_slice(&batch.obs[i * d..(i + 1) * d]);
            c.resets[r] = batch.resets[i];
            c.actions[r] = batch.actions[i];
            c.logp[r] = batch.logp[i];
            c.adv[r] = ((adv[i] as f64 - mean) / std) as f32;
            c.ret[r] = ret[i];
        }
    }
    c
}

/// Runs `update_epochs` passes of minibatch gradient steps over `batch`.
pub fn ppo_update(policy: &mut Policy<f32>, learner: &mut Learner, batch: &RolloutBatch, cfg: &PpoConfig, rng: &mut StreamRng, par: Lanes) -> Result<UpdateStats> {
    let (adv, ret) = advantages(batch, cfg, learner.values.as_mut());
    let l = cfg.seq_len;
    let per_env = batch.steps / l;
    let nseg = per_env * batch.envs;
    let per_mb = nseg / cfg.num_minibatches;
    let coefs = cfg.coefs();
    let np = policy.num_params();
    let mut stats = UpdateStats::default();
    let mut sums = LossSums::default();
    let mut rows_seen = 0usize;
    let mut order: Vec<usize> = (0..nseg).collect();
    for _ in 0..cfg.update_epochs {
        rng::shuffle(rng, &mut order);
        for mb in order.chunks(per_mb) {
            let rows = mb.len() * l;
            let idx = |s: usize, t: usize| ((s % per_env) * l + t) * batch.envs + s / per_env;
            let mut m = 0.0;
            let mut m2 = 0.0;
            for &s in mb {
                for t in 0..l {
                    let a = adv[idx(s, t)] as f64;
                    m += a;
                    m2 += a * a;
                }
            }
            let mean = m / rows as f64;
            let std = (m2 / rows as f64 - mean * mean).max(0.0).sqrt() + 1e-8;

            let chunks: Vec<&[usize]> = mb.chunks(cfg.grad_chunk).collect();
            let pol = &*policy;
            let results = par.map(chunks.len(), |ci| {
                let c = gather(batch, chunks[ci], l, per_env, &adv, &ret, mean, std);
                let mut cache = Cache::default();
                pol.forward(&c.obs, &c.h0, &c.resets, l, c.n, &mut cache);
                let r = l * c.n;
                let na = pol.config().num_actions;
                let mut dl = vec![0.0f32; r * na];
                let mut dv = vec![0.0f32; r];
                let s = ppo_loss(&cache.logits, &cache.values, &c.actions, &c.logp, &c.adv, &c.ret, &coefs, rows, &mut dl, &mut dv);
                let mut g = vec![0.0f32; np];
                pol.backward(&c.obs, &cache, &dl, &dv, &mut g);
                (g, s)
            });
            let mut grad = vec![0.0f32; np];
            for (g, s) in &results {
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += *b;
                }
                sums.add(s);
            }
            rows_seen += rows;
            let norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            if !norm.is_finite() || !sums.loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss or gradient at gradient step {}: loss sum {}, grad norm {norm}",
                    learner.grad_steps, sums.loss
                )));
            }
            let lr = cfg.lr_at(learner.grad_steps, learner.total_grad_steps);
            learner.adam.step(&mut policy.params, &grad, lr);
            learner.grad_steps += 1;
            stats.grad_norm += norm;
            stats.lr = lr;
            stats.minibatches += 1;
        }
    }
    let k = 1.0 / rows_seen.max(1) as f64;
    stats.policy_loss = sums.policy * k;
    stats.value_loss = sums.value * k;
    stats.entropy = sums.entropy * k;
    stats.clip_frac = sums.clipped * k;
    stats.approx_kl = sums.approx_kl * k;
    stats.grad_norm /= stats.minibatches.max(1) as f64;
    Ok(stats)
}
