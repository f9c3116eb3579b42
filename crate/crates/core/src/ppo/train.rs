//! Training runs under the baseline conditions.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::PpoConfig;
use super::rollout::{Collector, PartnerSampler};
use super::update::{ppo_update, Learner};
use crate::env::obs::{ObsMode, ObsShape};
use crate::env::{EnvOptions, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, EncoderKind, Policy, PolicyConfig, Trunk};
use crate::par::Lanes;
use crate::partner::{Phase, SwitchConfig, TraitDistribution};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Recurrent agent trained against the full partner distribution.
    Multi,
    /// Recurrent agent trained against one fixed partner.
    Single,
    /// Influence actions disabled; the partner's focus flips at mid-episode.
    #[serde(rename = "noninfluence")]
    NonInfluence,
    /// Stateless feedforward trunk.
    Mlp,
    /// Recurrent agent that only sees its own cell.
    Blind,
}

impl Condition {
    pub const ALL: [Condition; 5] = [Condition::Multi, Condition::Single, Condition::NonInfluence, Condition::Mlp, Condition::Blind];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Multi => "multi",
            Condition::Single => "single",
            Condition::NonInfluence => "noninfluence",
            Condition::Mlp => "mlp",
            Condition::Blind => "blind",
        }
    }

    pub fn trunk(self) -> Trunk {
        if self == Condition::Mlp {
            Trunk::Mlp
        } else {
            Trunk::Gru
        }
    }

    /// Environment switches for this condition; the same ones apply in evaluation.
    pub fn env_options(self, horizon: u32, obs: ObsMode) -> EnvOptions {
        let obs = if self == Condition::Blind { ObsMode::Blind } else { obs };
        match self {
            Condition::NonInfluence => EnvOptions { obs, influence: false, toggle_at: Some(horizon / 2) },
            _ => EnvOptions { obs, influence: true, toggle_at: None },
        }
    }

    /// Training distribution name for a partner family.
    pub fn train_distribution(self, family: &str) -> String {
        let base = family.strip_suffix("-switch").unwrap_or(family);
        match self {
            Condition::Single => format!("{base}-single"),
            _ => family.to_string(),
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown condition `{s}` (expected multi, single, noninfluence, mlp or blind)")))
    }
}

/// Everything needed to train one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub env: EnvSpec,
    pub condition: Condition,
    /// Partner family: `kitchen`, `kitchen-switch`, `coingame` or `blind`.
    pub family: String,
    pub obs: ObsMode,
    pub switch: Option<SwitchConfig>,
    pub ppo: PpoConfig,
    pub seed: u64,
    #[serde(default)]
    pub encoder: Option<EncoderKind>,
}

impl TrainSpec {
    pub fn env_options(&self) -> EnvOptions {
        self.condition.env_options(self.env.horizon(), self.obs)
    }

    pub fn policy_config(&self) -> PolicyConfig {
        let opts = self.env_options();
        let trunk = self.condition.trunk();
        let mut cfg = match &self.env {
            EnvSpec::Kitchen { .. } => PolicyConfig::kitchen(opts.obs, trunk),
            EnvSpec::CoinGame { .. } => PolicyConfig::coingame(opts.obs, trunk),
            EnvSpec::Lever { actions, .. } => PolicyConfig {
                obs: ObsShape { grid: None, flat: 1 },
                num_actions: *actions,
                enc_dim: 16,
                fc_dim: 16,
                hidden: 16,
                head_dim: 16,
                normalise: false,
                ..PolicyConfig::coingame(ObsMode::Blind, trunk)
            },
        };
        if let Some(e) = self.encoder {
            if cfg.obs.grid.is_some() {
                cfg.encoder = e;
            }
        }
        cfg
    }

    pub fn sampler(&self) -> Result<PartnerSampler> {
        let dist = TraitDistribution::named(&self.condition.train_distribution(&self.family))?;
        Ok(PartnerSampler { dist, phase: Phase::Train, switch: self.switch })
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        if let Some(s) = &self.switch {
            s.validate()?;
        }
        self.sampler()?;
        self.policy_config().validate()
    }
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: usize,
    pub steps: u64,
    /// Mean task return of episodes finished in this rollout.
    pub mean_return: f64,
    /// Task reward per environment step.
    pub throughput: f64,
    pub entropy: f64,
    pub value_loss: f64,
    pub clip_frac: f64,
    pub lr: f64,
    pub shaping_coef: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy<f32>,
    pub metrics: Vec<MetricsRow>,
    pub checkpoints: Vec<PathBuf>,
}

impl TrainOutcome {
    /// Mean of `mean_return` over the last `k` updates that finished an episode.
    pub fn final_return(&self, k: usize) -> f64 {
        let xs: Vec<f64> = self.metrics.iter().rev().map(|m| m.mean_return).filter(|v| v.is_finite()).take(k).collect();
        xs.iter().sum::<f64>() / xs.len().max(1) as f64
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Analysis(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Analysis(e.to_string()))?;
    r.deserialize().map(|row| row.map_err(|e| Error::Analysis(e.to_string()))).collect()
}

/// Trains one agent. With `out`, writes `metrics.csv` and checkpoints under it.
pub fn train(spec: &TrainSpec, out: Option<&Path>, par: Lanes) -> Result<TrainOutcome> {
    spec.validate()?;
    let cfg = &spec.ppo;
    let net = spec.policy_config();
    let mut policy = Policy::<f32>::new(net, rng::child_seed(spec.seed, Purpose::Init as u64))?;
    let mut shaping = cfg.shaping;
    shaping.enabled &= spec.env.is_kitchen();
    let mut collector = Collector::new(&spec.env, spec.env_options(), spec.sampler()?, cfg.num_envs, net.hidden, spec.seed, par)?;
    let mut learner = Learner::new(policy.num_params(), cfg);
    let mut shuffle = rng::stream(spec.seed, Purpose::Shuffle, 0);
    let updates = cfg.num_updates();
    let total = (updates * cfg.batch_size()) as f64;
    let mut metrics = Vec::with_capacity(updates);
    let mut checkpoints = Vec::new();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let mut last_return = f64::NAN;
    for u in 0..updates {
        let progress = (u * cfg.batch_size()) as f64 / total;
        let batch = collector.collect(&policy, cfg.num_steps, &shaping, progress);
        let stats = ppo_update(&mut policy, &mut learner, &batch, cfg, &mut shuffle, par);
        let stats = match (stats, out) {
            (Ok(s), _) => s,
            (Err(e), Some(dir)) => {
                let dump = serde_json::json!({ "error": e.to_string(), "update": u, "metrics": metrics });
                fs::write(dir.join("nan_dump.json"), serde_json::to_vec_pretty(&dump)?)?;
                checkpoint::save(&dir.join("checkpoints").join("nan.ckpt"), &policy, dump)?;
                return Err(e);
            }
            (Err(e), None) => return Err(e),
        };
        if !batch.episode_returns.is_empty() {
            last_return = batch.episode_returns.iter().sum::<f64>() / batch.episode_returns.len() as f64;
        }
        let row = MetricsRow {
            update: u + 1,
            steps: ((u + 1) * cfg.batch_size()) as u64,
            mean_return: last_return,
            throughput: batch.task_rewards.iter().map(|&r| r as f64).sum::<f64>() / batch.task_rewards.len() as f64,
            entropy: stats.entropy,
            value_loss: stats.value_loss,
            clip_frac: stats.clip_frac,
            lr: stats.lr,
            shaping_coef: shaping.coefficient(progress),
        };
        if u % 20 == 0 || u + 1 == updates {
            log::info!(
                "{} {} seed {}: update {}/{} return {:.3} entropy {:.3}",
                spec.env.name(),
                spec.condition,
                spec.seed,
                u + 1,
                updates,
                row.mean_return,
                row.entropy
            );
        }
        metrics.push(row);
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && (u + 1) % cfg.checkpoint_every == 0 && u + 1 < updates {
                let p = dir.join("checkpoints").join(format!("update_{:05}.ckpt", u + 1));
                checkpoint::save(&p, &policy, serde_json::json!({ "update": u + 1 }))?;
                checkpoints.push(p);
            }
        }
    }
    if let Some(dir) = out {
        let p = dir.join("checkpoints").join("final.ckpt");
        checkpoint::save(&p, &policy, serde_json::json!({ "update": updates, "spec": spec }))?;
        checkpoints.push(p);
        write_metrics(&dir.join("metrics.csv"), &metrics)?;
    }
    Ok(TrainOutcome { policy, metrics, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.name().parse::<Condition>().unwrap(), c);
        }
        assert!("fancy".parse::<Condition>().is_err());
    }

    #[test]
    fn single_condition_uses_single_partner_set() {
        assert_eq!(Condition::Single.train_distribution("coingame"), "coingame-single");
        assert_eq!(Condition::Single.train_distribution("kitchen-switch"), "kitchen-single");
        assert_eq!(Condition::Mlp.train_distribution("kitchen"), "kitchen");
        let d = TraitDistribution::named(&Condition::Single.train_distribution("coingame")).unwrap();
        assert_eq!(d.train, vec![crate::partner::Profile::Skill { s: [0.2, 0.8] }]);
    }

    #[test]
    fn noninfluence_toggles_at_half_horizon() {
        let o = Condition::NonInfluence.env_options(400, ObsMode::Full);
        assert!(!o.influence);
        assert_eq!(o.toggle_at, Some(200));
        assert_eq!(Condition::Blind.env_options(400, ObsMode::Full).obs, ObsMode::Blind);
    }
}
