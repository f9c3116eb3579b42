//! Generalised advantage estimation.

use crate::error::{Error, Result};

/// Advantages and returns for one trajectory segment.
///
/// `dones[t]` marks that the episode ended after step `t`; `last_value`
/// bootstraps the step after the segment.
pub fn compute_gae(rewards: &[f32], values: &[f32], dones: &[bool], last_value: f32, gamma: f64, lambda: f64) -> Result<(Vec<f32>, Vec<f32>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::Shape(format!("rewards {n}, values {}, dones {}", values.len(), dones.len())));
    }
    let (adv, ret) = compute_gae_batch(rewards, values, dones, &[last_value], n, 1, gamma, lambda);
    Ok((adv, ret))
}

/// Time-major `[steps x envs]` version of [`compute_gae`].
#[allow(clippy::too_many_arguments)]
pub fn compute_gae_batch(
    rewards: &[f32],
    values: &[f32],
    dones: &[bool],
    last_values: &[f32],
    steps: usize,
    envs: usize,
    gamma: f64,
    lambda: f64,
) -> (Vec<f32>, Vec<f32>) {
    let mut adv = vec![0.0f32; steps * envs];
    let mut ret = vec![0.0f32; steps * envs];
    for (e, &last) in last_values.iter().enumerate().take(envs) {
        let mut next_adv = 0.0f64;
        let mut next_value = last as f64;
        for t in (0..steps).rev() {
            let i = t * envs + e;
            let live = if dones[i] { 0.0 } else { 1.0 };
            let delta = rewards[i] as f64 + gamma * next_value * live - values[i] as f64;
            next_adv = delta + gamma * lambda * live * next_adv;
            adv[i] = next_adv as f32;
            ret[i] = (next_adv + values[i] as f64) as f32;
            next_value = values[i] as f64;
        }
    }
    (adv, ret)
}
