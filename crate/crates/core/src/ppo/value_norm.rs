//! Running standardisation of value targets.

use serde::{Deserialize, Serialize};

/// Debiased exponential moving mean and second moment of returns. The critic
/// regresses onto standardised returns and its outputs are mapped back
/// before they enter advantage estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueNorm {
    pub beta: f64,
    mean: f64,
    mean_sq: f64,
    debias: f64,
}

const MIN_VAR: f64 = 1e-2;

impl ValueNorm {
    pub fn new(beta: f64) -> Self {
        ValueNorm { beta, mean: 0.0, mean_sq: 0.0, debias: 0.0 }
    }

    pub fn update(&mut self, xs: &[f32]) {
        if xs.is_empty() {
            return;
        }
        let n = xs.len() as f64;
        let m = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
        let m2 = xs.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / n;
        let b = self.beta;
        self.mean = b * self.mean + (1.0 - b) * m;
        self.mean_sq = b * self.mean_sq + (1.0 - b) * m2;
        self.debias = b * self.debias + (1.0 - b);
    }

    /// Current mean and standard deviation; identity before the first update.
    pub fn stats(&self) -> (f64, f64) {
        if self.debias == 0.0 {
            return (0.0, 1.0);
        }
        let mean = self.mean / self.debias;
        let var = (self.mean_sq / self.debias - mean * mean).max(MIN_VAR);
        (mean, var.sqrt())
    }

    pub fn normalise(&self, x: f32) -> f32 {
        let (m, s) = self.stats();
        ((x as f64 - m) / s) as f32
    }

    pub fn denormalise(&self, x: f32) -> f32 {
        let (m, s) = self.stats();
        (x as f64 * s + m) as f32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_update_standardises_the_batch() {
        let mut n = ValueNorm::new(0.999);
        assert_eq!(n.denormalise(0.7), 0.7);
        let xs = [2.0f32, 4.0, 6.0, 8.0];
        n.update(&xs);
        let (m, s) = n.stats();
        assert!((m - 5.0).abs() < 1e-9);
        assert!((s - 5f64.sqrt()).abs() < 1e-9);
        for &x in &xs {
            assert!((n.denormalise(n.normalise(x)) - x).abs() < 1e-5);
        }
    }

    #[test]
    fn tiny_variance_is_floored() {
        let mut n = ValueNorm::new(0.9);
        n.update(&[3.0, 3.0]);
        assert!((n.stats().1 - MIN_VAR.sqrt()).abs() < 1e-9);
    }
}
