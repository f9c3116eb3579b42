use std::time::Instant;

use tandem_core::env::obs::ObsMode;
use tandem_core::env::{EnvOptions, EnvSpec, LeverEnv};
use tandem_core::par::Lanes;
use tandem_core::partner::{PartnerTraits, Profile};
use tandem_core::ppo::eval::{evaluate, grid};
use tandem_core::ppo::{train, Condition, PpoConfig, TrainSpec};

#[test]
fn ppo_solves_the_lever_within_fifty_thousand_steps() {
    let start = Instant::now();
    let env = EnvSpec::Lever { horizon: 16, actions: 4 };
    let ppo = PpoConfig { num_envs: 16, num_steps: 64, num_minibatches: 4, seq_len: 16, grad_chunk: 4, total_timesteps: 50_000, ..PpoConfig::default() };
    let spec = TrainSpec { env: env.clone(), condition: Condition::Multi, family: "blind".into(), obs: ObsMode::Full, switch: None, ppo, seed: 5, encoder: None };
    let out = train(&spec, None, Lanes::Sequential).unwrap();
    assert!(out.metrics.last().unwrap().steps <= 50_000 + 1024);

    let partners = [PartnerTraits::new(Profile::Noisy { p: 0.0 })];
    let seeds: Vec<u64> = (0..64).collect();
    let recs = evaluate(&out.policy, &env, EnvOptions::default(), &grid(&partners, &seeds), 3, false, Lanes::Sequential).unwrap();
    let mean = recs.iter().map(|r| r.task_return).sum::<f64>() / recs.len() as f64;
    let optimal = LeverEnv::new(16, 4).optimal_return() as f64;
    assert!(mean >= 0.95 * optimal, "mean return {mean} of {optimal}");
    assert!(start.elapsed().as_secs() < 120);
}
