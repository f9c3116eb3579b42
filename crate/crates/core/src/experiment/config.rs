//! Experiment definitions, presets and config-file loading.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::obs::ObsMode;
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::EncoderKind;
use crate::partner::{PartnerTraits, Profile, SwitchConfig, TraitDistribution};
use crate::ppo::{Condition, PpoConfig, TrainSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    /// Task allocation with unseen kitchen partners.
    Exp1,
    /// Mid-episode partner switch.
    Exp2,
    /// Blind agent with noisy-competence partners.
    Exp3,
    /// Coin collection with skill-gated partners.
    #[serde(rename = "coingame")]
    CoinGame,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [ExperimentId::Exp1, ExperimentId::Exp2, ExperimentId::Exp3, ExperimentId::CoinGame];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::CoinGame => "coingame",
        }
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}` (expected exp1, exp2, exp3 or coingame)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::Config(format!("unknown scale `{s}` (expected desk or paper)"))),
        }
    }
}

/// Partner set used for evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalSet {
    /// Held-out partners of the family, at most `partners` of them.
    HeldOut { partners: usize },
    /// The performance grid: every held-out partner, capped at 24.
    Performance,
    /// The probing grid: held-out partners first, then training partners, 46 in all.
    Probing,
}

/// Everything that defines one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub scale: Scale,
    /// Kitchen layouts, or a single `coingame` entry.
    pub layouts: Vec<String>,
    pub conditions: Vec<Condition>,
    pub horizon: u32,
    /// Partner family for training (`kitchen`, `kitchen-switch`, `coingame`, `blind`).
    pub family: String,
    pub obs: ObsMode,
    /// Switch behaviour of training partners.
    pub train_switch: Option<SwitchConfig>,
    /// Switch behaviour of evaluation partners.
    pub eval_switch: Option<SwitchConfig>,
    /// Number of training seeds per condition and layout.
    pub train_seeds: usize,
    /// First training seed.
    pub seed_base: u64,
    pub eval_set: EvalSet,
    /// Environment seeds per evaluation partner.
    pub eval_seeds: usize,
    /// Hidden-state capture and probes for recurrent conditions.
    pub capture: bool,
    pub probe_seeds: usize,
    /// Probe times; empty means every 16 steps and the horizon.
    pub probe_times: Vec<usize>,
    pub encoder: Option<EncoderKind>,
    pub coingame_side: usize,
    pub ppo: PpoConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec::preset(ExperimentId::Exp1, Scale::Desk)
    }
}

impl ExperimentSpec {
    pub fn preset(id: ExperimentId, scale: Scale) -> ExperimentSpec {
        let desk = scale == Scale::Desk;
        let all_layouts: Vec<String> = crate::env::layout::KITCHEN_LAYOUTS.iter().map(|s| s.to_string()).collect();
        let kitchen_layouts = if desk { vec!["cramped_room".to_string()] } else { all_layouts };
        let kitchen_ppo = if desk {
            PpoConfig::desk(2_000_000)
        } else {
            PpoConfig { total_timesteps: 15_000_000, shaping: crate::ppo::ShapingConfig { decay_fraction: 1.0 / 3.0, ..Default::default() }, ..Default::default() }
        };
        let base = ExperimentSpec {
            id,
            scale,
            layouts: kitchen_layouts,
            conditions: vec![Condition::Multi, Condition::Single, Condition::NonInfluence, Condition::Mlp],
            horizon: 400,
            family: "kitchen".into(),
            obs: ObsMode::Full,
            train_switch: None,
            eval_switch: None,
            train_seeds: if desk { 3 } else { 5 },
            seed_base: 0,
            eval_set: if desk { EvalSet::HeldOut { partners: 8 } } else { EvalSet::Performance },
            eval_seeds: if desk { 5 } else { 20 },
            capture: true,
            probe_seeds: 5,
            probe_times: Vec::new(),
            encoder: None,
            coingame_side: 5,
            ppo: kitchen_ppo,
        };
        match id {
            ExperimentId::Exp1 => base,
            ExperimentId::Exp2 => ExperimentSpec { conditions: vec![Condition::Multi], ..base }.forced(),
            ExperimentId::Exp3 => ExperimentSpec {
                conditions: vec![Condition::Multi, Condition::Single],
                eval_seeds: 10,
                eval_set: EvalSet::HeldOut { partners: 6 },
                ..base
            }
            .forced(),
            ExperimentId::CoinGame => ExperimentSpec {
                layouts: vec!["coingame".into()],
                horizon: 128,
                family: "coingame".into(),
                eval_set: EvalSet::HeldOut { partners: 5 },
                eval_seeds: 20,
                ppo: if desk { PpoConfig::desk(1_000_000) } else { PpoConfig { total_timesteps: 10_000_000, ..Default::default() } },
                ..base
            },
        }
    }

    /// Applies the settings each experiment fixes regardless of configuration.
    pub fn forced(mut self) -> ExperimentSpec {
        match self.id {
            ExperimentId::Exp1 => {
                self.horizon = 400;
            }
            ExperimentId::Exp2 => {
                self.horizon = 600;
                self.family = "kitchen-switch".into();
                self.train_switch = Some(SwitchConfig::TRAINING);
                self.eval_switch = Some(SwitchConfig::Fixed { at: 300 });
            }
            ExperimentId::Exp3 => {
                self.horizon = 400;
                self.obs = ObsMode::Blind;
                self.family = "blind".into();
            }
            ExperimentId::CoinGame => {
                self.family = "coingame".into();
                self.layouts = vec!["coingame".into()];
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layouts.is_empty() || self.conditions.is_empty() {
            return Err(Error::Config("at least one layout and one condition are required".into()));
        }
        if self.train_seeds == 0 || self.eval_seeds == 0 {
            return Err(Error::Config("train_seeds and eval_seeds must be positive".into()));
        }
        for l in &self.layouts {
            self.env_spec(l)?;
        }
        for c in &self.conditions {
            self.train_spec(*c, &self.layouts[0], 0).validate()?;
        }
        self.eval_partners()?;
        if let Some(s) = &self.eval_switch {
            s.validate()?;
        }
        Ok(())
    }

    pub fn env_spec(&self, layout: &str) -> Result<EnvSpec> {
        if self.id == ExperimentId::CoinGame {
            return Ok(EnvSpec::CoinGame { side: self.coingame_side, horizon: self.horizon });
        }
        crate::env::layout::kitchen_layout(layout)?;
        Ok(EnvSpec::Kitchen { layout: layout.to_string(), horizon: self.horizon })
    }

    pub fn train_spec(&self, condition: Condition, layout: &str, seed: u64) -> TrainSpec {
        TrainSpec {
            env: self.env_spec(layout).unwrap_or(EnvSpec::Kitchen { layout: layout.to_string(), horizon: self.horizon }),
            condition,
            family: self.family.clone(),
            obs: self.obs,
            switch: self.train_switch,
            ppo: self.ppo.clone(),
            seed,
            encoder: self.encoder,
        }
    }

    pub fn train_seed_list(&self) -> Vec<u64> {
        (0..self.train_seeds as u64).map(|i| self.seed_base + i).collect()
    }

    /// Evaluation partners, shared by every condition.
    pub fn eval_partners(&self) -> Result<Vec<PartnerTraits>> {
        let dist = TraitDistribution::named(&self.family)?;
        let held: Vec<Profile> = dist.eval.clone();
        let profiles: Vec<Profile> = match self.eval_set {
            EvalSet::HeldOut { partners } => spread(&held, partners),
            EvalSet::Performance => held.iter().copied().take(24).collect(),
            EvalSet::Probing => held.iter().chain(dist.train.iter().filter(|p| !held.contains(p))).copied().take(46).collect(),
        };
        if profiles.is_empty() {
            return Err(Error::Config("evaluation partner set is empty".into()));
        }
        Ok(profiles
            .into_iter()
            .map(|p| match self.eval_switch {
                Some(s) => PartnerTraits::new(p).with_switch(s),
                None => PartnerTraits::new(p),
            })
            .collect())
    }

    /// Environment seeds for evaluation; disjoint from any training seed stream.
    pub fn eval_env_seeds(&self) -> Vec<u64> {
        (0..self.eval_seeds as u64).map(|i| rng::child_seed(0xE7A1_0000 + self.seed_base, i)).collect()
    }

    pub fn probe_time_list(&self) -> Vec<usize> {
        if !self.probe_times.is_empty() {
            return self.probe_times.clone();
        }
        let h = self.horizon as usize;
        let mut ts: Vec<usize> = (0..h).step_by(16).collect();
        ts.push(h);
        ts
    }
}

/// `n` entries spread evenly over `items` in their original order.
fn spread<T: Copy>(items: &[T], n: usize) -> Vec<T> {
    if n >= items.len() {
        return items.to_vec();
    }
    (0..n).map(|i| items[i * items.len() / n]).collect()
}

/// Merges `overlay` into `base`, table by table.
fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses a config file. `id` and `scale` in the file pick the preset that
/// the remaining keys override; the experiment's fixed settings win last.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let overlay: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let pick = |k: &str| overlay.get(k).and_then(|v| v.as_str()).map(str::to_string);
    let id = pick("id").map(|s| s.parse()).transpose()?.unwrap_or(ExperimentId::Exp1);
    let scale = pick("scale").map(|s| s.parse()).transpose()?.unwrap_or(Scale::Desk);
    let preset = ExperimentSpec::preset(id, scale);
    let mut base = toml::Value::try_from(&preset).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut base, overlay);
    let spec: ExperimentSpec = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    Ok(spec.forced())
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_settings_hold() {
        let e2 = ExperimentSpec::preset(ExperimentId::Exp2, Scale::Desk);
        assert_eq!(e2.horizon, 600);
        assert_eq!(e2.eval_switch, Some(SwitchConfig::Fixed { at: 300 }));
        assert!(e2.train_switch.is_some());
        let e3 = ExperimentSpec::preset(ExperimentId::Exp3, Scale::Paper);
        assert_eq!(e3.obs, ObsMode::Blind);
        assert_eq!(e3.horizon, 400);
        assert_eq!(e3.eval_partners().unwrap().len(), 6);
        assert_eq!(ExperimentSpec::preset(ExperimentId::Exp1, Scale::Paper).horizon, 400);
    }

    #[test]
    fn config_file_overrides_preset_but_not_forced_values() {
        let spec = parse_config("id = \"exp2\"\nhorizon = 100\ntrain_seeds = 2\n[ppo]\nnum_envs = 16\n").unwrap();
        assert_eq!(spec.id, ExperimentId::Exp2);
        assert_eq!(spec.horizon, 600);
        assert_eq!(spec.train_seeds, 2);
        assert_eq!(spec.ppo.num_envs, 16);
        assert_eq!(spec.ppo.num_steps, PpoConfig::desk(1).num_steps);
        assert!(parse_config("id = \"exp9\"").is_err());
        assert!(parse_config("train_seeds = \"many\"").is_err());
    }

    #[test]
    fn desk_kitchen_partners_are_held_out() {
        let spec = ExperimentSpec::preset(ExperimentId::Exp1, Scale::Desk);
        let ps = spec.eval_partners().unwrap();
        assert_eq!(ps.len(), 8);
        let train = TraitDistribution::named("kitchen").unwrap().train;
        assert!(ps.iter().all(|p| !train.contains(&p.profile)));
        assert_eq!(ExperimentSpec { eval_set: EvalSet::Probing, ..spec.clone() }.eval_partners().unwrap().len(), 46);
        assert_eq!(ExperimentSpec { eval_set: EvalSet::Performance, ..spec }.eval_partners().unwrap().len(), 21);
    }

    #[test]
    fn presets_validate() {
        for id in ExperimentId::ALL {
            for scale in [Scale::Desk, Scale::Paper] {
                ExperimentSpec::preset(id, scale).validate().unwrap();
            }
        }
    }
}
