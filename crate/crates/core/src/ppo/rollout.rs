//! Experience collection over a vector of environments.

use rand::Rng;

use super::config::ShapingConfig;
use super::loss::log_softmax;
use crate::env::{AnyEnv, CoopEnv, EnvOptions, EnvSpec};
use crate::error::Result;
use crate::nn::{Cache, Policy};
use crate::par::Lanes;
use crate::partner::{PartnerTraits, Phase, Profile, SwitchConfig, TraitDistribution};
use crate::rng::{self, Purpose, StreamRng};

/// Draws partner traits for each new episode.
#[derive(Debug, Clone, PartialEq)]
pub struct PartnerSampler {
    pub dist: TraitDistribution,
    pub phase: Phase,
    pub switch: Option<SwitchConfig>,
}

impl PartnerSampler {
    pub fn draw(&self, rng: &mut StreamRng) -> PartnerTraits {
        let t = PartnerTraits::new(self.dist.sample(self.phase, rng));
        match self.switch {
            Some(s) => t.with_switch(s),
            None => t,
        }
    }
}

/// Samples an index from the categorical distribution given by `logits`.
pub fn sample_action(logits: &[f32], rng: &mut StreamRng) -> (usize, f32) {
    let mut lp = vec![0.0f32; logits.len()];
    log_softmax(logits, &mut lp);
    let u = rng::unit_f64(rng);
    let mut acc = 0.0f64;
    for (a, &l) in lp.iter().enumerate() {
        acc += (l as f64).exp();
        if u < acc {
            return (a, l);
        }
    }
    let a = lp.len() - 1;
    (a, lp[a])
}

/// One rollout, time-major over `steps x envs`.
#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub steps: usize,
    pub envs: usize,
    pub obs_dim: usize,
    pub hidden_dim: usize,
    pub obs: Vec<f32>,
    /// Policy state before each step, after any episode reset.
    pub hidden: Vec<f32>,
    /// The state was reset to zero before this step.
    pub resets: Vec<bool>,
    pub actions: Vec<usize>,
    pub logp: Vec<f32>,
    /// Training reward: task reward plus shaping.
    pub rewards: Vec<f32>,
    pub task_rewards: Vec<f32>,
    pub values: Vec<f32>,
    pub dones: Vec<bool>,
    /// Critic output on the final observation of episodes ending at this step.
    pub final_values: Vec<f32>,
    pub last_values: Vec<f32>,
    /// Partner profile per step. Logging only; never enters the network.
    pub trait_labels: Vec<Profile>,
    /// Task returns of episodes that finished during this rollout.
    pub episode_returns: Vec<f64>,
    pub entropy_sum: f64,
}

#[derive(Debug, Clone)]
struct Lane {
    env: AnyEnv,
    actions: StreamRng,
    traits: StreamRng,
    episodes: StreamRng,
    ep_return: f64,
    obs: Vec<f32>,
    // Outputs of the latest step.
    reward: f32,
    task_reward: f32,
    done: bool,
    action: usize,
    logp: f32,
    /// Observation at the horizon, before the reset.
    last_obs: Vec<f32>,
}

/// Vector of environments stepping in lockstep with one batched policy.
#[derive(Debug, Clone)]
pub struct Collector {
    lanes: Vec<Lane>,
    sampler: PartnerSampler,
    obs_dim: usize,
    hidden: Vec<f32>,
    fresh: Vec<bool>,
    hidden_dim: usize,
    par: Lanes,
    cache: Cache<f32>,
}

impl Collector {
    pub fn new(spec: &EnvSpec, opts: EnvOptions, sampler: PartnerSampler, envs: usize, hidden_dim: usize, seed: u64, par: Lanes) -> Result<Self> {
        let proto = spec.build(opts)?;
        let obs_dim = proto.obs_shape().dim();
        let mut lanes = Vec::with_capacity(envs);
        for i in 0..envs as u64 {
            let mut lane = Lane {
                env: proto.clone(),
                actions: rng::stream(seed, Purpose::Actions, i),
                traits: rng::stream(seed, Purpose::Traits, i),
                episodes: rng::stream(seed, Purpose::Episodes, i),
                ep_return: 0.0,
                obs: vec![0.0; obs_dim],
                reward: 0.0,
                task_reward: 0.0,
                done: false,
                action: 0,
                logp: 0.0,
                last_obs: Vec::new(),
            };
            let t = sampler.draw(&mut lane.traits);
            let s = lane.episodes.random();
            lane.env.reset(t, s);
            lane.env.observe(&mut lane.obs);
            lanes.push(lane);
        }
        Ok(Collector { lanes, sampler, obs_dim, hidden: vec![0.0; envs * hidden_dim], fresh: vec![true; envs], hidden_dim, par, cache: Cache::default() })
    }

    pub fn num_envs(&self) -> usize {
        self.lanes.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// Runs `steps` steps of every environment under `policy`.
    pub fn collect(&mut self, policy: &Policy<f32>, steps: usize, shaping: &ShapingConfig, progress: f64) -> RolloutBatch {
        let b = self.lanes.len();
        let (d, hd) = (self.obs_dim, self.hidden_dim);
        let na = policy.config().num_actions;
        let mut batch = RolloutBatch {
            steps,
            envs: b,
            obs_dim: d,
            hidden_dim: hd,
            obs: Vec::with_capacity(steps * b * d),
            hidden: Vec::with_capacity(steps * b * hd),
            ..Default::default()
        };
        let coef = shaping.coefficient(progress);
        let shaping = *shaping;
        let mut obs = vec![0.0f32; b * d];
        for _ in 0..steps {
            for (i, lane) in self.lanes.iter().enumerate() {
                obs[i * d..(i + 1) * d].copy_from_slice(&lane.obs);
                if self.fresh[i] {
                    self.hidden[i * hd..(i + 1) * hd].fill(0.0);
                }
            }
            batch.obs.extend_from_slice(&obs);
            batch.hidden.extend_from_slice(&self.hidden);
            batch.resets.extend_from_slice(&self.fresh);
            policy.forward(&obs, &self.hidden, &self.fresh, 1, b, &mut self.cache);
            batch.values.extend_from_slice(&self.cache.values);
            for i in 0..b {
                batch.entropy_sum += super::loss::entropy(&self.cache.logits[i * na..(i + 1) * na]) as f64;
                batch.trait_labels.push(self.lanes[i].env.traits().profile);
            }
            let logits = &self.cache.logits;
            let sampler = &self.sampler;
            self.par.for_each_mut(&mut self.lanes, |i, lane| {
                let (a, lp) = sample_action(&logits[i * na..(i + 1) * na], &mut lane.actions);
                let tr = lane.env.step(a);
                let shaped = shaping.reward(tr.onions_in_pot as u32, tr.cook_starts as u32, progress);
                lane.action = a;
                lane.logp = lp;
                lane.task_reward = tr.reward;
                lane.reward = tr.reward + if coef > 0.0 { shaped as f32 } else { 0.0 };
                lane.ep_return += tr.reward as f64;
                lane.done = tr.done;
                if tr.done {
                    lane.last_obs.resize(d, 0.0);
                    lane.env.observe(&mut lane.last_obs);
                    let t = sampler.draw(&mut lane.traits);
                    let s = lane.episodes.random();
                    lane.env.reset(t, s);
                }
                lane.env.observe(&mut lane.obs);
            });
            self.hidden.copy_from_slice(&self.cache.hidden);
            let finals = self.final_values(policy);
            batch.final_values.extend_from_slice(&finals);
            for (i, lane) in self.lanes.iter_mut().enumerate() {
                batch.actions.push(lane.action);
                batch.logp.push(lane.logp);
                batch.rewards.push(lane.reward);
                batch.task_rewards.push(lane.task_reward);
                batch.dones.push(lane.done);
                self.fresh[i] = lane.done;
                if lane.done {
                    batch.episode_returns.push(lane.ep_return);
                    lane.ep_return = 0.0;
                }
            }
        }
        // Bootstrap values for the step after the rollout.
        for (i, lane) in self.lanes.iter().enumerate() {
            obs[i * d..(i + 1) * d].copy_from_slice(&lane.obs);
        }
        policy.forward(&obs, &self.hidden, &self.fresh, 1, b, &mut self.cache);
        batch.last_values = self.cache.values.clone();
        batch
    }

    /// Critic output on the observation each lane ended its episode with, zero for running lanes.
    fn final_values(&mut self, policy: &Policy<f32>) -> Vec<f32> {
        let mut out = vec![0.0f32; self.lanes.len()];
        let done: Vec<usize> = (0..self.lanes.len()).filter(|&i| self.lanes[i].done).collect();
        if done.is_empty() {
            return out;
        }
        let (d, hd) = (self.obs_dim, self.hidden_dim);
        let mut obs = vec![0.0f32; done.len() * d];
        let mut h = vec![0.0f32; done.len() * hd];
        for (k, &i) in done.iter().enumerate() {
            obs[k * d..(k + 1) * d].copy_from_slice(&self.lanes[i].last_obs);
            h[k * hd..(k + 1) * hd].copy_from_slice(&self.hidden[i * hd..(i + 1) * hd]);
        }
        let mut cache = Cache::default();
        policy.forward(&obs, &h, &vec![false; done.len()], 1, done.len(), &mut cache);
        for (k, &i) in done.iter().enumerate() {
            out[i] = cache.values[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::obs::ObsMode;
    use crate::nn::{PolicyConfig, Trunk};

    fn setup(envs: usize, par: Lanes) -> (Collector, Policy<f32>) {
        let spec = EnvSpec::CoinGame { side: 5, horizon: 20 };
        let sampler = PartnerSampler { dist: TraitDistribution::named("coingame").unwrap(), phase: Phase::Train, switch: None };
        let c = Collector::new(&spec, EnvOptions::default(), sampler, envs, 32, 3, par).unwrap();
        let p = Policy::new(PolicyConfig::coingame(ObsMode::Full, Trunk::Gru), 1).unwrap();
        (c, p)
    }

    #[test]
    fn hidden_state_is_zero_after_done() {
        let (mut c, p) = setup(3, Lanes::Sequential);
        let b = c.collect(&p, 45, &ShapingConfig::default(), 0.0);
        assert_eq!(b.actions.len(), 45 * 3);
        for t in 0..44 {
            for e in 0..3 {
                if b.dones[t * 3 + e] {
                    assert!(b.resets[(t + 1) * 3 + e]);
                    assert!(b.hidden[((t + 1) * 3 + e) * 32..((t + 1) * 3 + e + 1) * 32].iter().all(|&v| v == 0.0));
                }
            }
        }
        assert_eq!(b.episode_returns.len(), 6);
    }

    #[test]
    fn lanes_do_not_change_results() {
        let (mut a, p) = setup(4, Lanes::Sequential);
        let (mut b, _) = setup(4, Lanes::Parallel);
        let x = a.collect(&p, 30, &ShapingConfig::default(), 0.0);
        let y = b.collect(&p, 30, &ShapingConfig::default(), 0.0);
        assert_eq!(x.actions, y.actions);
        assert_eq!(x.rewards, y.rewards);
        assert_eq!(x.values, y.values);
    }

    #[test]
    fn sampling_follows_probabilities() {
        let logits = [0.0f32, (3.0f32).ln()];
        let mut rng = rng::stream(0, Purpose::Actions, 0);
        let ones = (0..20_000).filter(|_| sample_action(&logits, &mut rng).0 == 1).count();
        assert!((ones as f64 / 20_000.0 - 0.75).abs() < 0.015);
    }
}
