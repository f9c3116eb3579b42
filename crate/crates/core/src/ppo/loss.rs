//! Clipped-surrogate actor-critic loss with analytic output gradients.

use serde::{Deserialize, Serialize};

use crate::nn::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoefs {
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

impl Default for LossCoefs {
    fn default() -> Self {
        LossCoefs { clip_eps: 0.2, vf_coef: 1.0, ent_coef: 0.01 }
    }
}

/// Sums over rows; divide by the row count for means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossSums {
    pub loss: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clipped: f64,
    pub approx_kl: f64,
}

impl LossSums {
    pub fn add(&mut self, o: &LossSums) {
        self.loss += o.loss;
        self.policy += o.policy;
        self.value += o.value;
        self.entropy += o.entropy;
        self.clipped += o.clipped;
        self.approx_kl += o.approx_kl;
    }

    pub fn scaled(&self, k: f64) -> LossSums {
        LossSums {
            loss: self.loss * k,
            policy: self.policy * k,
            value: self.value * k,
            entropy: self.entropy * k,
            clipped: self.clipped * k,
            approx_kl: self.approx_kl * k,
        }
    }
}

/// Writes `log softmax(logits)` into `out`.
pub fn log_softmax<S: Scalar>(logits: &[S], out: &mut [S]) {
    let m = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<S>().ln();
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = l - lse;
    }
}

/// Entropy of the categorical distribution given by `logits`.
pub fn entropy<S: Scalar>(logits: &[S]) -> S {
    let mut lp = vec![S::zero(); logits.len()];
    log_softmax(logits, &mut lp);
    -lp.iter().map(|&l| l.exp() * l).sum::<S>()
}

/// Per-row loss
/// `-min(ratio * A, clip(ratio) * A) + vf * 0.5 * (v - R)^2 - ent * H`,
/// averaged with weight `1 / norm`. Writes the loss gradient w.r.t. the logits
/// and values into `dlogits` and `dvalues` and returns unnormalised sums.
#[allow(clippy::too_many_arguments)]
pub fn ppo_loss<S: Scalar>(
    logits: &[S],
    values: &[S],
    actions: &[usize],
    old_logp: &[S],
    adv: &[S],
    returns: &[S],
    coefs: &LossCoefs,
    norm: usize,
    dlogits: &mut [S],
    dvalues: &mut [S],
) -> LossSums {
    let rows = actions.len();
    let na = logits.len() / rows.max(1);
    let w = 1.0 / norm as f64;
    let (lo, hi) = (1.0 - coefs.clip_eps, 1.0 + coefs.clip_eps);
    let mut lp = vec![S::zero(); na];
    let mut sums = LossSums::default();
    for r in 0..rows {
        let lr = &logits[r * na..(r + 1) * na];
        log_softmax(lr, &mut lp);
        let a = actions[r];
        let logp = lp[a].f64();
        let old = old_logp[r].f64();
        let ratio = (logp - old).exp();
        let av = adv[r].f64();
        let s1 = ratio * av;
        let s2 = ratio.clamp(lo, hi) * av;
        let pg = -s1.min(s2);
        // The unclipped branch carries gradient unless the clipped one is strictly smaller.
        let active = s1 <= s2 || (lo..=hi).contains(&ratio);
        let dpg_dlogp = if active { -av * ratio } else { 0.0 };
        let ent: f64 = -lp.iter().map(|&l| l.f64().exp() * l.f64()).sum::<f64>();
        let v = values[r].f64();
        let ret = returns[r].f64();
        let vl = 0.5 * (v - ret) * (v - ret);

        let dl = &mut dlogits[r * na..(r + 1) * na];
        for (j, d) in dl.iter_mut().enumerate() {
            let lpj = lp[j].f64();
            let pj = lpj.exp();
            let onehot = if j == a { 1.0 } else { 0.0 };
            // d(-ent * H)/dlogit_j = ent * p_j * (log p_j + H)
            let g = dpg_dlogp * (onehot - pj) + coefs.ent_coef * pj * (lpj + ent);
            *d = S::of(g * w);
        }
        dvalues[r] = S::of(coefs.vf_coef * (v - ret) * w);

        sums.policy += pg;
        sums.value += vl;
        sums.entropy += ent;
        sums.loss += pg + coefs.vf_coef * vl - coefs.ent_coef * ent;
        if (ratio - 1.0).abs() > coefs.clip_eps {
            sums.clipped += 1.0;
        }
        sums.approx_kl += (ratio - 1.0) - (logp - old);
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ratio_gives_negative_mean_advantage() {
        let logits = [0.1, 0.5, -0.2, 0.3, 0.3, 0.3];
        let mut lp = [0.0; 3];
        let mut old = [0.0; 2];
        log_softmax(&logits[..3], &mut lp);
        old[0] = lp[1];
        log_softmax(&logits[3..], &mut lp);
        old[1] = lp[0];
        let adv = [1.5, -0.5];
        let (mut dl, mut dv) = ([0.0; 6], [0.0; 2]);
        let s = ppo_loss(&logits, &[0.0, 0.0], &[1, 0], &old, &adv, &[0.0, 0.0], &LossCoefs::default(), 2, &mut dl, &mut dv);
        assert!((s.policy / 2.0 + 0.5).abs() < 1e-12);
        assert_eq!(s.clipped, 0.0);
    }

    #[test]
    fn positive_advantage_uses_clipped_ratio() {
        // ratio 1.5, A = 2: objective min(3.0, 2.4) = 2.4 and no gradient.
        let logits = [0.0, 0.0];
        let old = [(0.5f64).ln() - (1.5f64).ln()];
        let (mut dl, mut dv) = ([0.0; 2], [0.0; 1]);
        let c = LossCoefs { ent_coef: 0.0, ..Default::default() };
        let s = ppo_loss(&logits, &[0.0], &[0], &old, &[2.0], &[0.0], &c, 1, &mut dl, &mut dv);
        assert!((s.policy + 2.4).abs() < 1e-12);
        assert_eq!(dl, [0.0, 0.0]);
        assert_eq!(s.clipped, 1.0);
    }

    #[test]
    fn entropy_is_bounded() {
        for logits in [[0.0, 0.0, 0.0, 0.0], [10.0, -10.0, 0.0, 3.0], [50.0, 0.0, 0.0, 0.0]] {
            let h: f64 = entropy(&logits);
            assert!((0.0..=(4f64).ln() + 1e-12).contains(&h));
        }
    }

    #[test]
    fn output_gradients_match_finite_differences() {
        let logits = [0.3, -0.1, 0.7, 0.2, 0.0, -0.4];
        let values = [0.5, -0.2];
        let actions = [2, 0];
        let old = [-1.2, -0.9];
        let adv = [0.8, -1.1];
        let ret = [1.0, 0.3];
        let c = LossCoefs::default();
        let (mut dl, mut dv) = ([0.0; 6], [0.0; 2]);
        ppo_loss(&logits, &values, &actions, &old, &adv, &ret, &c, 2, &mut dl, &mut dv);
        let f = |l: &[f64], v: &[f64]| {
            let (mut a, mut b) = ([0.0; 6], [0.0; 2]);
            ppo_loss(l, v, &actions, &old, &adv, &ret, &c, 2, &mut a, &mut b).loss / 2.0
        };
        let e = 1e-6;
        for i in 0..6 {
            let (mut up, mut dn) = (logits, logits);
            up[i] += e;
            dn[i] -= e;
            let num = (f(&up, &values) - f(&dn, &values)) / (2.0 * e);
            assert!((num - dl[i]).abs() < 1e-8, "logit {i}: {num} vs {}", dl[i]);
        }
        for i in 0..2 {
            let (mut up, mut dn) = (values, values);
            up[i] += e;
            dn[i] -= e;
            let num = (f(&logits, &up) - f(&logits, &dn)) / (2.0 * e);
            assert!((num - dv[i]).abs() < 1e-8);
        }
    }
}
