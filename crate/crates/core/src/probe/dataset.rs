//! Probe datasets built from hidden traces.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::trace::HiddenTrace;
use crate::error::{Error, Result};
use crate::partner::Profile;
use crate::rng::{self, Purpose};

/// How a trace is summarised into one feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FeatureMode {
    /// Mean of `h_1..=h_t`; at `t = 0` the pre-interaction state `h_0`.
    Prefix { t: usize },
    /// Mean of the last `window` states `h_{T-window+1}..=h_T`.
    Final { window: usize },
}

impl FeatureMode {
    pub fn name(&self) -> String {
        match self {
            FeatureMode::Prefix { t } => format!("prefix_{t}"),
            FeatureMode::Final { window } => format!("final_{window}"),
        }
    }
}

/// Which trait value a probe decodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    /// Cooldown, skill or randomness for task / colour 1.
    First,
    /// Cooldown or skill for task / colour 2.
    Second,
}

impl Label {
    pub fn of(self, p: &Profile) -> f64 {
        match (self, *p) {
            (Label::First, Profile::Cooldown { v }) => v[0] as f64,
            (Label::Second, Profile::Cooldown { v }) => v[1] as f64,
            (Label::First, Profile::Skill { s }) => s[0],
            (Label::Second, Profile::Skill { s }) => s[1],
            (_, Profile::Noisy { p }) => p,
        }
    }
}

/// Writes the feature of `trace` under `mode` into `out` (length `hidden_dim`).
pub fn feature(trace: &HiddenTrace, mode: FeatureMode, out: &mut [f64]) -> Result<()> {
    let horizon = trace.horizon();
    let (from, to) = match mode {
        FeatureMode::Prefix { t } if t > horizon => return Err(Error::Config(format!("feature time {t} beyond horizon {horizon}"))),
        FeatureMode::Prefix { t: 0 } => (0, 0),
        FeatureMode::Prefix { t } => (1, t),
        FeatureMode::Final { window } if window == 0 || window > horizon => {
            return Err(Error::Config(format!("final window {window} outside 1..={horizon}")))
        }
        FeatureMode::Final { window } => (horizon - window + 1, horizon),
    };
    out.fill(0.0);
    for t in from..=to {
        for (o, &h) in out.iter_mut().zip(trace.state(t)) {
            *o += h as f64;
        }
    }
    let k = 1.0 / (to - from + 1) as f64;
    out.iter_mut().for_each(|o| *o *= k);
    Ok(())
}

/// Features, labels and split keys for one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDataset {
    pub dim: usize,
    /// `rows x dim`.
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mode: FeatureMode,
}

/// Row indices of a seed-keyed split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl ProbeDataset {
    pub fn build(traces: &[HiddenTrace], mode: FeatureMode, label: Label) -> Result<Self> {
        let dim = traces.first().map(|t| t.dim()).ok_or_else(|| Error::Analysis("no traces".into()))?;
        let mut features = vec![0.0; traces.len() * dim];
        for (i, tr) in traces.iter().enumerate() {
            if tr.dim() != dim {
                return Err(Error::Shape(format!("trace {i} has width {} instead of {dim}", tr.dim())));
            }
            feature(tr, mode, &mut features[i * dim..(i + 1) * dim])?;
        }
        Ok(ProbeDataset {
            dim,
            features,
            labels: traces.iter().map(|t| label.of(&t.header.profile)).collect(),
            seeds: traces.iter().map(|t| t.header.seed).collect(),
            mode,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Distinct label values in ascending order.
    pub fn classes(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.labels.clone();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }

    /// 80/20 split over distinct rollout seeds, shuffled by `split_seed`.
    /// Every episode of a rollout seed lands on the same side.
    pub fn split(&self, split_seed: u64) -> Result<Split> {
        let mut seeds: Vec<u64> = self.seeds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if seeds.len() < 2 {
            return Err(Error::Analysis(format!("need at least 2 rollout seeds to split, found {}", seeds.len())));
        }
        rng::shuffle(&mut rng::stream(split_seed, Purpose::Probe, 0), &mut seeds);
        let n_train = ((seeds.len() as f64 * 0.8).round() as usize).clamp(1, seeds.len() - 1);
        let train_seeds: BTreeSet<u64> = seeds[..n_train].iter().copied().collect();
        let (train, test) = (0..self.len()).partition(|&i| train_seeds.contains(&self.seeds[i]));
        let s = Split { train, test };
        self.check_split(&s)?;
        Ok(s)
    }

    /// Fails if any rollout seed appears on both sides of `split`.
    pub fn check_split(&self, split: &Split) -> Result<()> {
        let a: BTreeSet<u64> = split.train.iter().map(|&i| self.seeds[i]).collect();
        if let Some(&i) = split.test.iter().find(|&&i| a.contains(&self.seeds[i])) {
            return Err(Error::Analysis(format!("rollout seed {} is in both probe splits", self.seeds[i])));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::trace::TraceHeader;

    pub(crate) fn synthetic(n_seeds: u64, per_seed: usize, horizon: u32, dim: usize) -> Vec<HiddenTrace> {
        let mut out = Vec::new();
        for seed in 0..n_seeds {
            for k in 0..per_seed {
                let x = [0.1, 0.3, 0.5, 0.7, 0.9][k % 5];
                let hidden = (0..(horizon as usize + 1) * dim).map(|i| if i < dim { 0.0 } else { ((i * 31 + seed as usize) % 17) as f32 / 17.0 }).collect();
                out.push(HiddenTrace {
                    header: TraceHeader {
                        episode: out.len(),
                        seed,
                        condition: "multi".into(),
                        layout: "coingame".into(),
                        profile: Profile::Skill { s: [x, 1.0 - x] },
                        horizon,
                        hidden_dim: dim,
                        task_return: 0.0,
                    },
                    hidden,
                });
            }
        }
        out
    }

    #[test]
    fn prefix_average_matches_direct_computation() {
        let ts = synthetic(3, 2, 10, 4);
        let ds = ProbeDataset::build(&ts, FeatureMode::Prefix { t: 7 }, Label::First).unwrap();
        for (i, tr) in ts.iter().enumerate() {
            for u in 0..4 {
                let direct: f64 = (1..=7).map(|t| tr.state(t)[u] as f64).sum::<f64>() / 7.0;
                assert!((ds.row(i)[u] - direct).abs() < 1e-6);
            }
        }
        let zero = ProbeDataset::build(&ts, FeatureMode::Prefix { t: 0 }, Label::First).unwrap();
        assert!(zero.features.iter().all(|&v| v == 0.0));
        let last = ProbeDataset::build(&ts, FeatureMode::Final { window: 1 }, Label::First).unwrap();
        assert_eq!(last.row(0)[2], ts[0].state(10)[2] as f64);
    }

    #[test]
    fn out_of_range_times_are_rejected() {
        let ts = synthetic(2, 1, 10, 2);
        assert!(ProbeDataset::build(&ts, FeatureMode::Prefix { t: 11 }, Label::First).is_err());
        assert!(ProbeDataset::build(&ts, FeatureMode::Final { window: 0 }, Label::First).is_err());
    }

    #[test]
    fn split_is_by_seed_and_roughly_80_20() {
        let ts = synthetic(20, 3, 5, 2);
        let ds = ProbeDataset::build(&ts, FeatureMode::Prefix { t: 5 }, Label::First).unwrap();
        let s = ds.split(4).unwrap();
        assert_eq!(s.train.len(), 16 * 3);
        assert_eq!(s.test.len(), 4 * 3);
        ds.check_split(&s).unwrap();
        let bad = Split { train: vec![0], test: vec![1] };
        assert!(ds.check_split(&bad).is_err());
    }

    #[test]
    fn labels_follow_profiles() {
        assert_eq!(Label::Second.of(&Profile::Cooldown { v: [3, 8] }), 8.0);
        assert_eq!(Label::First.of(&Profile::Skill { s: [0.1, 0.9] }), 0.1);
    }
}
