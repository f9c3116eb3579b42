//! Latent partner traits and the named sets they are drawn from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Trait profile hidden from the ego agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// Steps between consecutive actions for subtask 1 and subtask 2.
    Cooldown { v: [u32; 2] },
    /// Success probability in red and blue mode.
    Skill { s: [f64; 2] },
    /// Per-step probability of a uniformly random action.
    Noisy { p: f64 },
}

impl Profile {
    /// Swaps the per-task pair. Noisy profiles have no pair and are returned unchanged.
    pub fn mirrored(self) -> Profile {
        match self {
            Profile::Cooldown { v } => Profile::Cooldown { v: [v[1], v[0]] },
            Profile::Skill { s } => Profile::Skill { s: [s[1], s[0]] },
            p @ Profile::Noisy { .. } => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match *self {
            Profile::Cooldown { .. } => Ok(()),
            Profile::Skill { s } if s.iter().any(|x| !(0.0..=1.0).contains(x)) => bad(format!("skill {s:?} outside [0,1]")),
            Profile::Noisy { p } if !(0.0..=1.0).contains(&p) => bad(format!("randomness {p} outside [0,1]")),
            _ => Ok(()),
        }
    }

    /// Scalar label used by probes and correlation analysis.
    ///
    /// Cooldown profiles report the task-1 cooldown, skill profiles the red
    /// skill, noisy profiles the randomness.
    pub fn primary_label(&self) -> f64 {
        match *self {
            Profile::Cooldown { v } => v[0] as f64,
            Profile::Skill { s } => s[0],
            Profile::Noisy { p } => p,
        }
    }

    /// Signed advantage at task 1 / red over task 2 / blue.
    ///
    /// For cooldowns a lower value is faster, so the sign is flipped.
    pub fn advantage(&self) -> f64 {
        match *self {
            Profile::Cooldown { v } => v[1] as f64 - v[0] as f64,
            Profile::Skill { s } => s[0] - s[1],
            Profile::Noisy { .. } => 0.0,
        }
    }

    /// Which of the two tasks / colours this partner is better at, if any.
    pub fn stronger(&self) -> Option<usize> {
        let a = self.advantage();
        if a > 0.0 {
            Some(0)
        } else if a < 0.0 {
            Some(1)
        } else {
            None
        }
    }
}

/// When a within-episode switch happens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SwitchConfig {
    /// With `probability` per episode, switch at a uniform step in
    /// `[lo * horizon, hi * horizon]`.
    Random { probability: f64, lo: f64, hi: f64 },
    /// Always switch at step `at`.
    Fixed { at: u32 },
}

impl SwitchConfig {
    /// Training schedule: half of the episodes switch somewhere in 30%..70% of the horizon.
    pub const TRAINING: SwitchConfig = SwitchConfig::Random { probability: 0.5, lo: 0.3, hi: 0.7 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            SwitchConfig::Random { probability, lo, hi } => {
                if !(0.0..=1.0).contains(&probability) || !(lo > 0.0 && lo <= hi && hi < 1.0) {
                    return Err(Error::Config(format!("bad switch config {self:?}")));
                }
                Ok(())
            }
            SwitchConfig::Fixed { .. } => Ok(()),
        }
    }

    /// Draws the switch step for one episode; `None` means no switch.
    pub fn draw(&self, horizon: u32, rng: &mut StreamRng) -> Option<u32> {
        match *self {
            SwitchConfig::Random { probability, lo, hi } => {
                let fires = rng::unit_f64(rng) < probability;
                let first = (lo * horizon as f64).ceil() as u32;
                let last = (hi * horizon as f64).floor() as u32;
                let at = first + rng::index(rng, (last - first + 1) as usize) as u32;
                fires.then_some(at)
            }
            SwitchConfig::Fixed { at } => Some(at),
        }
    }
}

/// Full latent description of a partner for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerTraits {
    pub profile: Profile,
    pub switch: Option<SwitchConfig>,
}

impl PartnerTraits {
    pub fn new(profile: Profile) -> Self {
        PartnerTraits { profile, switch: None }
    }

    pub fn with_switch(mut self, switch: SwitchConfig) -> Self {
        self.switch = Some(switch);
        self
    }
}

/// Applies a drawn switch. At exactly `t == switch_at` the profile is mirrored.
pub fn maybe_switch(traits: &PartnerTraits, t: u32, switch_at: Option<u32>) -> PartnerTraits {
    match switch_at {
        Some(at) if at == t && traits.switch.is_some() => PartnerTraits { profile: traits.profile.mirrored(), ..*traits },
        _ => *traits,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

/// Cooldown values for training partners.
pub const KITCHEN_TRAIN_COOLDOWNS: [u32; 6] = [1, 2, 3, 4, 7, 9];
/// Cooldown values for evaluation partners.
pub const KITCHEN_EVAL_COOLDOWNS: [u32; 5] = [0, 2, 3, 8, 10];
pub const COINGAME_TRAIN_X: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
pub const COINGAME_EVAL_X: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const BLIND_TRAIN_P: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
pub const BLIND_EVAL_P: [f64; 6] = [0.0, 0.05, 0.1, 0.9, 0.95, 1.0];

/// Named training and evaluation partner sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitDistribution {
    pub name: String,
    pub train: Vec<Profile>,
    pub eval: Vec<Profile>,
}

impl TraitDistribution {
    /// Known names: `kitchen`, `kitchen-single`, `kitchen-switch`, `coingame`,
    /// `coingame-single`, `blind`, `blind-single`.
    pub fn named(name: &str) -> Result<TraitDistribution> {
        let train_pairs: Vec<[u32; 2]> = pairs(&KITCHEN_TRAIN_COOLDOWNS);
        let eval_pairs: Vec<[u32; 2]> =
            pairs(&KITCHEN_EVAL_COOLDOWNS).into_iter().filter(|p| !train_pairs.contains(p)).collect();
        let cooldowns = |ps: &[[u32; 2]]| ps.iter().map(|&v| Profile::Cooldown { v }).collect::<Vec<_>>();
        let skills = |xs: &[f64]| xs.iter().map(|&x| Profile::Skill { s: [x, 1.0 - x] }).collect::<Vec<_>>();
        let noisy = |ps: &[f64]| ps.iter().map(|&p| Profile::Noisy { p }).collect::<Vec<_>>();

        let (train, eval) = match name {
            "kitchen" => (cooldowns(&train_pairs), cooldowns(&eval_pairs)),
            "kitchen-single" => (vec![Profile::Cooldown { v: [1, 9] }], cooldowns(&eval_pairs)),
            "kitchen-switch" => {
                let fast_first: Vec<[u32; 2]> = eval_pairs.iter().copied().filter(|v| v[0] < v[1]).collect();
                (cooldowns(&train_pairs), cooldowns(&fast_first))
            }
            "coingame" => (skills(&COINGAME_TRAIN_X), skills(&COINGAME_EVAL_X)),
            "coingame-single" => (vec![Profile::Skill { s: [0.2, 0.8] }], skills(&COINGAME_EVAL_X)),
            "blind" => (noisy(&BLIND_TRAIN_P), noisy(&BLIND_EVAL_P)),
            "blind-single" => (vec![Profile::Noisy { p: 0.2 }], noisy(&BLIND_EVAL_P)),
            _ => return Err(Error::UnknownDistribution(name.to_string())),
        };
        Ok(TraitDistribution { name: name.to_string(), train, eval })
    }

    pub fn profiles(&self, phase: Phase) -> &[Profile] {
        match phase {
            Phase::Train => &self.train,
            Phase::Eval => &self.eval,
        }
    }

    /// Uniform draw from the phase's set.
    pub fn sample(&self, phase: Phase, rng: &mut StreamRng) -> Profile {
        let set = self.profiles(phase);
        set[rng::index(rng, set.len())]
    }
}

/// Draws a profile from the named distribution for one seed.
pub fn sample_traits(dist: &str, phase: Phase, seed: u64) -> Result<Profile> {
    let d = TraitDistribution::named(dist)?;
    Ok(d.sample(phase, &mut rng::stream(seed, rng::Purpose::Traits, 0)))
}

fn pairs(values: &[u32]) -> Vec<[u32; 2]> {
    values.iter().flat_map(|&a| values.iter().map(move |&b| [a, b])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kitchen_train_samples_stay_in_set() {
        for seed in 0..500 {
            let Profile::Cooldown { v } = sample_traits("kitchen", Phase::Train, seed).unwrap() else { panic!() };
            assert!(v.iter().all(|x| KITCHEN_TRAIN_COOLDOWNS.contains(x)));
        }
    }

    #[test]
    fn eval_and_train_pairs_are_disjoint() {
        let d = TraitDistribution::named("kitchen").unwrap();
        assert_eq!(d.train.len(), 36);
        for e in &d.eval {
            assert!(!d.train.contains(e), "{e:?}");
            let Profile::Cooldown { v } = e else { panic!() };
            assert!(v.iter().all(|x| KITCHEN_EVAL_COOLDOWNS.contains(x)));
        }
        assert_eq!(d.eval.len(), 21);
    }

    #[test]
    fn coingame_eval_samples_are_complementary() {
        for seed in 0..200 {
            let Profile::Skill { s } = sample_traits("coingame", Phase::Eval, seed).unwrap() else { panic!() };
            assert!(COINGAME_EVAL_X.contains(&s[0]));
            assert_eq!(s[1], 1.0 - s[0]);
        }
    }

    #[test]
    fn blind_eval_samples_in_set() {
        for seed in 0..200 {
            let Profile::Noisy { p } = sample_traits("blind", Phase::Eval, seed).unwrap() else { panic!() };
            assert!(BLIND_EVAL_P.contains(&p));
        }
    }

    #[test]
    fn unknown_distribution_is_an_error() {
        assert!(matches!(sample_traits("nope", Phase::Train, 0), Err(Error::UnknownDistribution(_))));
    }

    #[test]
    fn eval_switch_mirrors_at_300() {
        let t = PartnerTraits::new(Profile::Cooldown { v: [1, 9] }).with_switch(SwitchConfig::Fixed { at: 300 });
        let at = SwitchConfig::Fixed { at: 300 }.draw(600, &mut rng::stream(0, rng::Purpose::Switch, 0));
        assert_eq!(at, Some(300));
        assert_eq!(maybe_switch(&t, 299, at).profile, Profile::Cooldown { v: [1, 9] });
        assert_eq!(maybe_switch(&t, 300, at).profile, Profile::Cooldown { v: [9, 1] });
    }

    #[test]
    fn no_switch_draw_keeps_traits() {
        let t = PartnerTraits::new(Profile::Cooldown { v: [2, 7] }).with_switch(SwitchConfig::TRAINING);
        for step in 0..600 {
            assert_eq!(maybe_switch(&t, step, None), t);
        }
    }

    #[test]
    fn mirroring_is_an_involution() {
        for p in TraitDistribution::named("kitchen").unwrap().train {
            assert_eq!(p.mirrored().mirrored(), p);
        }
        for p in TraitDistribution::named("coingame").unwrap().eval {
            assert_eq!(p.mirrored().mirrored(), p);
        }
    }

    #[test]
    fn training_switch_times_uniform_on_window() {
        // Kolmogorov-Smirnov against the discrete uniform law on [180, 420].
        let cfg = SwitchConfig::TRAINING;
        let mut times = Vec::new();
        let mut fired = 0;
        for ep in 0..10_000 {
            if let Some(at) = cfg.draw(600, &mut rng::stream(ep, rng::Purpose::Switch, 0)) {
                assert!((180..=420).contains(&at));
                times.push(at);
                fired += 1;
            }
        }
        let frac = fired as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.03, "switch fraction {frac}");
        times.sort_unstable();
        let n = times.len() as f64;
        let mut d: f64 = 0.0;
        for k in 180..=420u32 {
            let emp = times.partition_point(|&x| x <= k) as f64 / n;
            let cdf = (k - 179) as f64 / 241.0;
            d = d.max((emp - cdf).abs());
        }
        // 1% critical value of the KS statistic.
        assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
    }
}
