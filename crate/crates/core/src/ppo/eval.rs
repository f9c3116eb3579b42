//! Lockstep evaluation episodes with optional hidden-state capture.

use serde::{Deserialize, Serialize};

use super::rollout::sample_action;
use crate::env::{CoopEnv, EnvOptions, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::{Cache, Policy};
use crate::par::Lanes;
use crate::partner::{PartnerTraits, Profile};
use crate::rng::{self, Purpose, StreamRng};

/// One evaluation episode to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodePlan {
    pub traits: PartnerTraits,
    /// Environment seed: start state, partner noise and switch time.
    pub seed: u64,
}

/// Every partner paired with every seed.
pub fn grid(partners: &[PartnerTraits], seeds: &[u64]) -> Vec<EpisodePlan> {
    partners.iter().flat_map(|&traits| seeds.iter().map(move |&seed| EpisodePlan { traits, seed })).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub partner: Profile,
    pub seed: u64,
    pub task_return: f64,
    /// Task reward at each step.
    pub rewards: Vec<f32>,
    /// Partner task or coin mode in effect after each step.
    pub focus: Vec<u8>,
    /// Whether the partner's traits had switched by each step.
    pub switched: Vec<bool>,
    pub ego_actions: Vec<u8>,
    pub events: Vec<(u32, String)>,
    /// `(horizon + 1) x hidden` states, `h_0` first; empty unless captured.
    pub hidden: Vec<f32>,
}

impl EpisodeRecord {
    /// Running sum of task reward with a leading zero (`horizon + 1` entries).
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rewards.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for &r in &self.rewards {
            acc += r as f64;
            out.push(acc);
        }
        out
    }
}

/// Runs every planned episode to its horizon, all environments in lockstep,
/// sampling actions from the policy. Captures hidden states when asked.
pub fn evaluate(policy: &Policy<f32>, spec: &EnvSpec, opts: EnvOptions, plan: &[EpisodePlan], action_seed: u64, capture: bool, par: Lanes) -> Result<Vec<EpisodeRecord>> {
    if capture && !policy.is_recurrent() {
        return Err(Error::Config("hidden-state capture needs a recurrent policy".into()));
    }
    let proto = spec.build(opts)?;
    if proto.obs_shape() != policy.config().obs {
        return Err(Error::Shape("policy observation shape does not match the environment".into()));
    }
    let n = plan.len();
    let horizon = spec.horizon() as usize;
    let d = proto.obs_shape().dim();
    let hd = policy.hidden_dim();
    let na = policy.config().num_actions;

    struct Slot<E> {
        env: E,
        rng: StreamRng,
        obs: Vec<f32>,
        rec: EpisodeRecord,
        initial: Profile,
    }
    let mut slots: Vec<_> = plan
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut env = proto.clone();
            env.reset(p.traits, p.seed);
            let mut obs = vec![0.0; d];
            env.observe(&mut obs);
            Slot {
                env,
                rng: rng::stream(action_seed, Purpose::Actions, i as u64),
                obs,
                rec: EpisodeRecord {
                    partner: p.traits.profile,
                    seed: p.seed,
                    task_return: 0.0,
                    rewards: Vec::with_capacity(horizon),
                    focus: Vec::with_capacity(horizon),
                    switched: Vec::with_capacity(horizon),
                    ego_actions: Vec::with_capacity(horizon),
                    events: Vec::new(),
                    hidden: if capture { vec![0.0; (horizon + 1) * hd] } else { Vec::new() },
                },
                initial: p.traits.profile,
            }
        })
        .collect();

    let mut h = vec![0.0f32; n * hd];
    let mut obs = vec![0.0f32; n * d];
    let resets = vec![false; n];
    let mut cache = Cache::default();
    for t in 0..horizon {
        for (i, s) in slots.iter().enumerate() {
            obs[i * d..(i + 1) * d].copy_from_slice(&s.obs);
        }
        policy.forward(&obs, &h, &resets, 1, n, &mut cache);
        h.copy_from_slice(&cache.hidden);
        let logits = &cache.logits;
        let hidden = &cache.hidden;
        par.for_each_mut(&mut slots, |i, s| {
            let (a, _) = sample_action(&logits[i * na..(i + 1) * na], &mut s.rng);
            let tr = s.env.step(a);
            s.rec.rewards.push(tr.reward);
            s.rec.task_return += tr.reward as f64;
            s.rec.focus.push(tr.focus as u8);
            s.rec.switched.push(s.env.traits().profile != s.initial);
            s.rec.ego_actions.push(tr.ego_action as u8);
            s.rec.events.extend(tr.tags.iter().map(|&tag| (t as u32, tag.to_string())));
            if capture {
                s.rec.hidden[(t + 1) * hd..(t + 2) * hd].copy_from_slice(&hidden[i * hd..(i + 1) * hd]);
            }
            s.env.observe(&mut s.obs);
        });
    }
    Ok(slots.into_iter().map(|s| s.rec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::obs::ObsMode;
    use crate::nn::{PolicyConfig, Trunk};
    use crate::partner::SwitchConfig;

    #[test]
    fn capture_starts_from_zero_and_has_horizon_plus_one_states() {
        let spec = EnvSpec::CoinGame { side: 5, horizon: 16 };
        let p = Policy::<f32>::new(PolicyConfig::coingame(ObsMode::Full, Trunk::Gru), 0).unwrap();
        let partners = [PartnerTraits::new(Profile::Skill { s: [0.3, 0.7] })];
        let recs = evaluate(&p, &spec, EnvOptions::default(), &grid(&partners, &[1, 2]), 5, true, Lanes::Sequential).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert_eq!(r.hidden.len(), 17 * 32);
            assert!(r.hidden[..32].iter().all(|&v| v == 0.0));
            assert_eq!(r.rewards.len(), 16);
            assert_eq!(r.cumulative().len(), 17);
        }
    }

    #[test]
    fn mlp_capture_is_refused() {
        let spec = EnvSpec::CoinGame { side: 5, horizon: 16 };
        let p = Policy::<f32>::new(PolicyConfig::coingame(ObsMode::Full, Trunk::Mlp), 0).unwrap();
        let partners = [PartnerTraits::new(Profile::Skill { s: [0.3, 0.7] })];
        assert!(evaluate(&p, &spec, EnvOptions::default(), &grid(&partners, &[1]), 5, true, Lanes::Sequential).is_err());
    }

    #[test]
    fn fixed_switch_is_recorded() {
        let spec = EnvSpec::Kitchen { layout: "cramped_room".into(), horizon: 40 };
        let p = Policy::<f32>::new(PolicyConfig::kitchen(ObsMode::Full, Trunk::Gru), 0).unwrap();
        let partners = [PartnerTraits::new(Profile::Cooldown { v: [2, 8] }).with_switch(SwitchConfig::Fixed { at: 20 })];
        let r = &evaluate(&p, &spec, EnvOptions::default(), &grid(&partners, &[0]), 1, false, Lanes::Sequential).unwrap()[0];
        assert!(!r.switched[19]);
        assert!(r.switched[20]);
    }
}
