//! Small statistics helpers: means, least squares, correlation and bootstrap intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Resamples used by every bootstrap interval unless stated otherwise.
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Sample variance with `n - 1` in the denominator.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Ordinary least-squares slope of `y` on `x`; `None` when `x` has no spread.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 1e-300 || syy <= 1e-300 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// A point estimate with a two-sided percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Interval {
    /// Strictly above `other` with no overlap.
    pub fn above(&self, other: &Interval) -> bool {
        self.lo > other.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Percentile bootstrap of `stat` over resamples of `0..n` indices.
pub fn bootstrap<F>(n: usize, resamples: usize, level: f64, seed: u64, stat: F) -> Result<Interval>
where
    F: Fn(&[usize]) -> Option<f64>,
{
    if n == 0 {
        return Err(Error::Analysis("bootstrap over an empty sample".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let estimate = stat(&all).ok_or_else(|| Error::Analysis("statistic undefined on the full sample".into()))?;
    let mut rng = rng::stream(seed, Purpose::Bootstrap, 0);
    let mut idx = vec![0usize; n];
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for v in idx.iter_mut() {
            *v = rng::index(&mut rng, n);
        }
        if let Some(s) = stat(&idx) {
            draws.push(s);
        }
    }
    if draws.is_empty() {
        return Err(Error::Analysis("statistic undefined on every resample".into()));
    }
    draws.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    Ok(Interval { estimate, lo: quantile(&draws, a), hi: quantile(&draws, 1.0 - a), n })
}

/// 95% percentile bootstrap interval of the mean.
pub fn mean_ci(xs: &[f64], seed: u64) -> Result<Interval> {
    bootstrap(xs.len(), BOOTSTRAP_RESAMPLES, 0.95, seed, |idx| Some(idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64))
}
