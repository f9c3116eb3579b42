//! Finite-difference verification of the full actor-critic loss gradient.

use serde::{Deserialize, Serialize};

use super::loss::{log_softmax, ppo_loss, LossCoefs};
use crate::nn::gradcheck::{relative_error, EPS};
use crate::nn::{Cache, Policy, PolicyConfig};
use crate::rng::{self, Purpose, StreamRng};

/// Worst relative error within one parameter group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub group: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

struct Problem {
    obs: Vec<f64>,
    h0: Vec<f64>,
    resets: Vec<bool>,
    actions: Vec<usize>,
    old_logp: Vec<f64>,
    adv: Vec<f64>,
    ret: Vec<f64>,
    steps: usize,
    batch: usize,
}

fn gauss(rng: &mut StreamRng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

impl Problem {
    fn random(policy: &Policy<f64>, steps: usize, batch: usize, rng: &mut StreamRng) -> Problem {
        let c = policy.config();
        let rows = steps * batch;
        let d = c.obs.dim();
        // Sparse, mostly one-hot inputs like real observations.
        let obs = (0..rows * d).map(|_| if rng::unit_f64(rng) < 0.15 { 1.0 + 0.5 * gauss(rng) } else { 0.0 }).collect();
        let h0 = (0..batch * c.hidden).map(|_| 0.8 * (2.0 * rng::unit_f64(rng) - 1.0)).collect();
        let resets = (0..rows).map(|r| r >= batch && rng::unit_f64(rng) < 0.1).collect();
        let actions = (0..rows).map(|_| rng::index(rng, c.num_actions)).collect();
        let mut p = Problem { obs, h0, resets, actions, old_logp: vec![], adv: vec![], ret: vec![], steps, batch };
        let mut cache = Cache::default();
        policy.forward(&p.obs, &p.h0, &p.resets, steps, batch, &mut cache);
        let na = c.num_actions;
        let mut lp = vec![0.0; na];
        for r in 0..rows {
            log_softmax(&cache.logits[r * na..(r + 1) * na], &mut lp);
            // Old policies a little off the current one, clear of the clip boundary.
            let shift = 0.1 * (2.0 * rng::unit_f64(rng) - 1.0);
            p.old_logp.push(lp[p.actions[r]] - shift);
        }
        p.adv = (0..rows).map(|_| gauss(rng)).collect();
        p.ret = (0..rows).map(|_| gauss(rng)).collect();
        p
    }

    fn loss_and_grad(&self, policy: &Policy<f64>, coefs: &LossCoefs, grad: Option<&mut [f64]>) -> f64 {
        let rows = self.steps * self.batch;
        let mut cache = Cache::default();
        policy.forward(&self.obs, &self.h0, &self.resets, self.steps, self.batch, &mut cache);
        let na = policy.config().num_actions;
        let mut dl = vec![0.0; rows * na];
        let mut dv = vec![0.0; rows];
        let s = ppo_loss(&cache.logits, &cache.values, &self.actions, &self.old_logp, &self.adv, &self.ret, coefs, rows, &mut dl, &mut dv);
        if let Some(g) = grad {
            policy.backward(&self.obs, &cache, &dl, &dv, g);
        }
        s.loss / rows as f64
    }
}

fn group_of(name: &str) -> &'static str {
    match name.split('.').next().unwrap_or("") {
        "encoder" | "conv1" | "conv2" => "encoder",
        "fc" => "fc",
        "gru" | "mlp1" | "mlp2" => "trunk",
        "actor1" | "actor2" => "actor",
        _ => "critic",
    }
}

/// Compares analytic and central-difference gradients of the PPO loss over a
/// random `steps x batch` sequence, sampling `per_group` coordinates from each
/// of the encoder, FC, trunk, actor and critic parameters.
pub fn actor_critic_grad_check(config: PolicyConfig, steps: usize, batch: usize, per_group: usize, seed: u64) -> Vec<GroupCheck> {
    let mut rng = rng::stream(seed, Purpose::Init, 1 << 20);
    let mut policy = Policy::<f64>::new(config, seed).expect("valid config");
    // Move biases off zero so every path is exercised.
    for v in policy.params.iter_mut() {
        if *v == 0.0 {
            *v = 0.05 * gauss(&mut rng);
        }
    }
    let problem = Problem::random(&policy, steps, batch, &mut rng);
    let coefs = LossCoefs::default();
    let mut grad = vec![0.0; policy.num_params()];
    problem.loss_and_grad(&policy, &coefs, Some(&mut grad));

    let specs = policy.layout().specs().to_vec();
    let mut out: Vec<GroupCheck> = Vec::new();
    for group in ["encoder", "fc", "trunk", "actor", "critic"] {
        let mut coords: Vec<usize> = specs.iter().filter(|s| group_of(&s.name) == group).flat_map(|s| s.range()).collect();
        rng::shuffle(&mut rng, &mut coords);
        if group == "encoder" {
            // Weights on inputs that are zero everywhere have exactly zero gradient; keep them but favour live rows.
            coords.sort_by_key(|&i| grad[i] == 0.0);
        }
        coords.truncate(per_group);
        let mut worst = 0.0f64;
        for &i in &coords {
            let orig = policy.params[i];
            policy.params[i] = orig + EPS;
            let up = problem.loss_and_grad(&policy, &coefs, None);
            policy.params[i] = orig - EPS;
            let down = problem.loss_and_grad(&policy, &coefs, None);
            policy.params[i] = orig;
            worst = worst.max(relative_error(grad[i], (up - down) / (2.0 * EPS)));
        }
        out.push(GroupCheck { group: group.to_string(), checked: coords.len(), max_rel_error: worst });
    }
    out
}
