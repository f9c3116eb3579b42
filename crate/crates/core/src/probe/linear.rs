//! Linear probes, the distance-aware scorer and the random baselines.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{ProbeDataset, Split};
use crate::error::{Error, Result};
use crate::nn::Adam;
use crate::rng::{self, Purpose};
use crate::stats::{self, Interval};

/// Optimisation steps for every probe.
pub const PROBE_STEPS: usize = 1000;
/// Adam learning rate for every probe.
pub const PROBE_LR: f64 = 1e-2;

/// Class value closest to `x`; ties go to the smaller class.
pub fn snap(x: f64, classes: &[f64]) -> f64 {
    classes.iter().copied().fold(f64::NAN, |best, c| if best.is_nan() || (x - c).abs() < (x - best).abs() { c } else { best })
}

/// Mean of `1 - |pred - true| / (max - min)` over the class set's range.
pub fn distance_aware_accuracy(pred: &[f64], truth: &[f64], classes: &[f64]) -> Result<f64> {
    let lo = classes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = classes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if classes.len() < 2 || hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Analysis(format!("degenerate class set {classes:?}")));
    }
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Analysis("prediction and label counts differ or are zero".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| 1.0 - (p - t).abs() / (hi - lo)).sum::<f64>() / pred.len() as f64)
}

/// A trained probe and its held-out score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub steps: usize,
    pub lr: f64,
    pub train_mse: f64,
    pub test_mse: f64,
    /// Distance-aware accuracy of snapped test predictions.
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl ProbeResult {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

fn mse(params: &[f64], x: &[f64], y: &[f64], rows: &[usize], dim: usize, grad: Option<&mut [f64]>) -> f64 {
    let b = params[dim];
    let mut loss = 0.0;
    let k = 1.0 / rows.len() as f64;
    let mut g = grad;
    if let Some(g) = g.as_deref_mut() {
        g.fill(0.0);
    }
    for &r in rows {
        let xr = &x[r * dim..(r + 1) * dim];
        let e = b + params[..dim].iter().zip(xr).map(|(w, v)| w * v).sum::<f64>() - y[r];
        loss += e * e * k;
        if let Some(g) = g.as_deref_mut() {
            let d = 2.0 * e * k;
            for (gi, v) in g[..dim].iter_mut().zip(xr) {
                *gi += d * v;
            }
            g[dim] += d;
        }
    }
    loss
}

/// Fits a scalar linear map by full-batch Adam on squared error and scores
/// snapped test predictions against `classes`.
pub fn train_probe_on(features: &[f64], labels: &[f64], dim: usize, split: &Split, classes: &[f64], seed: u64) -> Result<ProbeResult> {
    if classes.len() < 2 {
        return Err(Error::Analysis(format!("probe needs at least 2 distinct labels, found {}", classes.len())));
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::Analysis("empty probe split".into()));
    }
    let mut rng = rng::stream(seed, Purpose::Probe, 1);
    let bound = 1.0 / (dim as f64).sqrt();
    let mut params: Vec<f64> = (0..=dim).map(|_| bound * (2.0 * rng::unit_f64(&mut rng) - 1.0)).collect();
    let mut adam = Adam::<f64>::new(dim + 1, 1e-8);
    let mut grad = vec![0.0; dim + 1];
    for _ in 0..PROBE_STEPS {
        mse(&params, features, labels, &split.train, dim, Some(&mut grad));
        adam.step(&mut params, &grad, PROBE_LR);
    }
    let train_mse = mse(&params, features, labels, &split.train, dim, None);
    let test_mse = mse(&params, features, labels, &split.test, dim, None);
    let bias = params.pop().unwrap_or(0.0);
    let mut res = ProbeResult {
        weights: params,
        bias,
        steps: adam.steps() as usize,
        lr: PROBE_LR,
        train_mse,
        test_mse,
        accuracy: 0.0,
        n_train: split.train.len(),
        n_test: split.test.len(),
    };
    let pred: Vec<f64> = split.test.iter().map(|&r| snap(res.predict(&features[r * dim..(r + 1) * dim]), classes)).collect();
    let truth: Vec<f64> = split.test.iter().map(|&r| labels[r]).collect();
    res.accuracy = distance_aware_accuracy(&pred, &truth, classes)?;
    Ok(res)
}

/// Splits `ds` by rollout seed with `seed` and trains one probe.
pub fn train_probe(ds: &ProbeDataset, seed: u64) -> Result<ProbeResult> {
    let split = ds.split(seed)?;
    train_probe_on(&ds.features, &ds.labels, ds.dim, &split, &ds.classes(), seed)
}

/// Same split and labels as [`train_probe`] with standard normal features.
pub fn random_feature_probe(ds: &ProbeDataset, seed: u64) -> Result<ProbeResult> {
    let split = ds.split(seed)?;
    let mut rng = rng::stream(seed, Purpose::Probe, 2);
    let noise: Vec<f64> = (0..ds.features.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    train_probe_on(&noise, &ds.labels, ds.dim, &split, &ds.classes(), seed)
}

/// Accuracy interval of probes trained on `features` after permuting the labels,
/// `perms` times. Its 95% band is the chance level for this dataset.
pub fn permutation_null(features: &[f64], ds: &ProbeDataset, perms: usize, seed: u64) -> Result<Interval> {
    let split = ds.split(seed)?;
    let classes = ds.classes();
    let mut rng = rng::stream(seed, Purpose::Probe, 3);
    let mut accs = Vec::with_capacity(perms);
    for _ in 0..perms {
        let mut labels = ds.labels.clone();
        rng::shuffle(&mut rng, &mut labels);
        accs.push(train_probe_on(features, &labels, ds.dim, &split, &classes, seed)?.accuracy);
    }
    let est = stats::mean(&accs);
    accs.sort_by(f64::total_cmp);
    Ok(Interval { estimate: est, lo: stats::quantile(&accs, 0.025), hi: stats::quantile(&accs, 0.975), n: perms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::dataset::FeatureMode;

    fn dataset(features: Vec<f64>, labels: Vec<f64>, dim: usize, seeds: Vec<u64>) -> ProbeDataset {
        ProbeDataset { dim, features, labels, seeds, mode: FeatureMode::Prefix { t: 1 } }
    }

    #[test]
    fn hand_computed_scores() {
        let c = [0.0, 2.0, 3.0, 8.0, 10.0];
        assert_eq!(distance_aware_accuracy(&[3.0], &[8.0], &c).unwrap(), 0.5);
        assert_eq!(distance_aware_accuracy(&[8.0], &[8.0], &c).unwrap(), 1.0);
        assert_eq!(distance_aware_accuracy(&[0.0], &[10.0], &c).unwrap(), 0.0);
        assert!(distance_aware_accuracy(&[1.0], &[1.0], &[1.0]).is_err());
        assert!(distance_aware_accuracy(&[1.0], &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn snapping_picks_nearest_class() {
        let c = [0.0, 2.0, 3.0, 8.0, 10.0];
        assert_eq!(snap(5.4, &c), 3.0);
        assert_eq!(snap(5.6, &c), 8.0);
        assert_eq!(snap(-4.0, &c), 0.0);
        assert_eq!(snap(99.0, &c), 10.0);
    }

    #[test]
    fn decodable_feature_gives_perfect_accuracy() {
        let classes = [0.1, 0.3, 0.5, 0.7, 0.9];
        let labels: Vec<f64> = (0..100).map(|i| classes[i % 5]).collect();
        let ds = dataset(labels.clone(), labels, 1, (0..100).map(|i| i / 2).collect());
        let r = train_probe(&ds, 0).unwrap();
        assert_eq!(r.steps, PROBE_STEPS);
        assert_eq!(r.lr, 1e-2);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn single_label_is_rejected() {
        let ds = dataset(vec![0.0; 10], vec![1.0; 10], 1, (0..10).collect());
        assert!(train_probe(&ds, 0).is_err());
    }

    #[test]
    fn random_features_sit_inside_the_permutation_null() {
        let classes = [0.0, 2.0, 3.0, 8.0, 10.0];
        let n = 200;
        let labels: Vec<f64> = (0..n).map(|i| classes[(i * 7) % 5]).collect();
        let ds = dataset(vec![0.0; n * 8], labels, 8, (0..n as u64).collect());
        let rnd = random_feature_probe(&ds, 3).unwrap();
        let mut rng = rng::stream(3, Purpose::Probe, 2);
        let noise: Vec<f64> = (0..n * 8).map(|_| StandardNormal.sample(&mut rng)).collect();
        let null = permutation_null(&noise, &ds, 40, 3).unwrap();
        assert!(null.lo <= rnd.accuracy && rnd.accuracy <= null.hi, "{rnd:?} {null:?}");
    }
}
