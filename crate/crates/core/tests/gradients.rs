use std::time::Instant;

use tandem_core::env::obs::ObsMode;
use tandem_core::nn::{EncoderKind, PolicyConfig, Trunk};
use tandem_core::ppo::verify::actor_critic_grad_check;

const TOL: f64 = 1e-4;

fn check(name: &str, cfg: PolicyConfig) {
    let groups = actor_critic_grad_check(cfg, 8, 2, 24, 11);
    for g in &groups {
        assert!(g.checked > 0, "{name}: no coordinates checked in {}", g.group);
        assert!(g.max_rel_error < TOL, "{name}: {g:?}");
    }
    let names: Vec<&str> = groups.iter().map(|g| g.group.as_str()).collect();
    for want in ["encoder", "trunk", "actor", "critic"] {
        assert!(names.contains(&want), "{name}: group {want} missing from {names:?}");
    }
}

#[test]
fn kitchen_gru_matches_finite_differences() {
    let t = Instant::now();
    check("kitchen affine", PolicyConfig::kitchen(ObsMode::Full, Trunk::Gru));
    check("kitchen blind", PolicyConfig::kitchen(ObsMode::Blind, Trunk::Gru));
    assert!(t.elapsed().as_secs() < 60);
}

#[test]
fn coingame_networks_match_finite_differences() {
    check("coingame gru", PolicyConfig::coingame(ObsMode::Full, Trunk::Gru));
    check("coingame mlp", PolicyConfig::coingame(ObsMode::Full, Trunk::Mlp));
    check("coingame conv", PolicyConfig { encoder: EncoderKind::Conv, ..PolicyConfig::coingame(ObsMode::Full, Trunk::Gru) });
}
