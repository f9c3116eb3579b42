//! Exhaustive and randomised invariant checks for both gridworlds.
//!
//! Every check returns an [`AuditReport`] listing what was examined and any
//! violations, so the same checks serve unit tests and end-to-end reports.

use std::sync::Arc;

use super::coingame::{step_coingame, CoinAction, CoinGameState, CoinRules, Colour};
use super::kitchen::{initial_state, step_kitchen, Item, KitchenAction, KitchenEventKind, KitchenRules, KitchenState, Pose, POT_CAPACITY};
use super::layout::{kitchen_layout, Dir, Layout};
use super::obs::ObsMode;
use super::{CoopEnv, EnvOptions, EnvSpec, KitchenEnv, Move};
use crate::error::Result;
use crate::partner::{PartnerTraits, Profile};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    fn fail(&mut self, msg: String) {
        if self.violations.len() < 20 {
            self.violations.push(msg);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.checked > 0
    }

    pub fn merge(&mut self, other: AuditReport) {
        self.checked += other.checked;
        for v in other.violations {
            self.fail(v);
        }
    }
}

fn count(held: &[Item; 2], item: Item) -> i64 {
    held.iter().filter(|&&h| h == item).count() as i64
}

/// Every ego action and partner move from every reachable-shaped kitchen state
/// (both poses, held items, pot contents) for one step, checking placement,
/// pot bounds, item conservation against the event log and reward accounting.
pub fn kitchen_exhaustive(layout: &Layout) -> AuditReport {
    let mut rep = AuditReport::default();
    let rules = KitchenRules { ego_cooldown: 0, ..KitchenRules::default() };
    let floors = layout.floor_cells();
    let poses: Vec<Pose> = floors.iter().flat_map(|&pos| Dir::ALL.map(|facing| Pose { pos, facing })).collect();
    let pots: Vec<(u8, u8)> = vec![(0, 0), (1, 0), (2, 0), (POT_CAPACITY, 0), (POT_CAPACITY, 1), (POT_CAPACITY, rules.cook_time)];
    for &a in &poses {
        for &b in poses.iter().filter(|b| b.pos != a.pos) {
            for ha in Item::ALL {
                for hb in Item::ALL {
                    for &(onions, timer) in &pots {
                        let mut s0 = initial_state([a, b]);
                        s0.held = [ha, hb];
                        s0.pot_onions = onions;
                        s0.cook_timer = timer;
                        for ego in KitchenAction::ALL {
                            for partner in Move::ALL {
                                let mut s = s0.clone();
                                let out = step_kitchen(layout, &rules, &mut s, ego, partner);
                                rep.checked += 1;
                                check_kitchen_step(layout, &s0, &s, &out, &mut rep);
                            }
                        }
                    }
                }
            }
        }
    }
    rep
}

fn check_kitchen_step(layout: &Layout, s0: &KitchenState, s: &KitchenState, out: &super::kitchen::KitchenStep, rep: &mut AuditReport) {
    let n = |k: KitchenEventKind| out.events.iter().filter(|e| e.kind == k).count() as i64;
    let ctx = || format!("{:?} {:?} -> {:?}", s0.agents, s0.held, s.held);
    if s.agents[0].pos == s.agents[1].pos {
        rep.fail(format!("agents overlap: {}", ctx()));
    }
    if !layout.is_floor(s.agents[0].pos) || !layout.is_floor(s.agents[1].pos) {
        rep.fail(format!("agent off the floor: {}", ctx()));
    }
    if s.pot_onions > POT_CAPACITY || (s.cook_timer > 0 && s.pot_onions != POT_CAPACITY) {
        rep.fail(format!("pot out of bounds: {} onions, timer {}", s.pot_onions, s.cook_timer));
    }
    let d_onion = count(&s.held, Item::Onion) - count(&s0.held, Item::Onion);
    if d_onion != n(KitchenEventKind::OnionPicked) - n(KitchenEventKind::OnionReturned) - n(KitchenEventKind::OnionInPot) {
        rep.fail(format!("onion count not conserved: {}", ctx()));
    }
    let d_pot = s.pot_onions as i64 - s0.pot_onions as i64;
    if d_pot != n(KitchenEventKind::OnionInPot) - POT_CAPACITY as i64 * n(KitchenEventKind::SoupPicked) {
        rep.fail(format!("pot contents not conserved: {} -> {}", s0.pot_onions, s.pot_onions));
    }
    let d_plate = count(&s.held, Item::Plate) - count(&s0.held, Item::Plate);
    if d_plate != n(KitchenEventKind::PlatePicked) - n(KitchenEventKind::PlateReturned) - n(KitchenEventKind::SoupPicked) {
        rep.fail(format!("plate count not conserved: {}", ctx()));
    }
    let d_soup = count(&s.held, Item::Soup) - count(&s0.held, Item::Soup);
    if d_soup != n(KitchenEventKind::SoupPicked) - n(KitchenEventKind::SoupDelivered) {
        rep.fail(format!("soup count not conserved: {}", ctx()));
    }
    if out.reward != n(KitchenEventKind::SoupDelivered) as f32 || s.soups_delivered - s0.soups_delivered != out.reward as u32 {
        rep.fail(format!("reward {} does not match deliveries", out.reward));
    }
}

/// Every placement of two agents and two coins on a `side x side` board,
/// both modes and every joint move, for one step.
pub fn coingame_exhaustive(side: usize) -> AuditReport {
    let mut rep = AuditReport::default();
    let layout = Layout::open("coin-audit", side, side);
    let cells = layout.floor_cells();
    let rules = CoinRules::default();
    let mut k = 0u64;
    for &e in &cells {
        for &p in cells.iter().filter(|&&p| p != e) {
            for &r in cells.iter().filter(|&&r| r != e && r != p) {
                for &b in cells.iter().filter(|&&b| b != e && b != p && b != r) {
                    for mode in [Colour::Red, Colour::Blue] {
                        for ego in CoinAction::ALL {
                            for partner in Move::ALL {
                                k += 1;
                                let mut s = CoinGameState { agents: [e, p], coins: [r, b], coins_collected: 0, mode, t: 0, rng: rng::stream(k, Purpose::Coins, 0) };
                                let out = step_coingame(&layout, &rules, &mut s, ego, partner);
                                rep.checked += 1;
                                check_coin_step(&layout, &s, out.reward, out.collected.len(), &mut rep);
                            }
                        }
                    }
                }
            }
        }
    }
    rep
}

fn check_coin_step(layout: &Layout, s: &CoinGameState, reward: f32, collected: usize, rep: &mut AuditReport) {
    if s.agents[0] == s.agents[1] {
        rep.fail(format!("agents overlap at {:?}", s.agents[0]));
    }
    if s.coins[0] == s.coins[1] || !layout.is_floor(s.coins[0]) || !layout.is_floor(s.coins[1]) {
        rep.fail(format!("coins not two distinct floor cells: {:?}", s.coins));
    }
    if s.agents.iter().any(|a| s.coins.contains(a)) {
        rep.fail(format!("coin under an agent: {:?} {:?}", s.agents, s.coins));
    }
    if reward != collected as f32 || s.coins_collected as usize != collected {
        rep.fail(format!("reward {reward} but {collected} coins collected"));
    }
}

/// Partner with cooldown `v` on both tasks and an idle ego over `horizon`
/// steps: non-stay partner actions are at least `max(v, 1)` apart, hence at
/// most `ceil(horizon / v)` of them.
pub fn cooldown_gating(layout_name: &str, v: u32, horizon: u32, seed: u64) -> Result<AuditReport> {
    let layout = Arc::new(kitchen_layout(layout_name)?);
    let rules = KitchenRules { horizon, ..KitchenRules::default() };
    let mut env = KitchenEnv::new(layout, rules, ObsMode::Full);
    env.reset(PartnerTraits::new(Profile::Cooldown { v: [v, v] }), seed);
    let mut rep = AuditReport::default();
    let mut acts = Vec::new();
    for t in 0..horizon {
        let out = env.step(KitchenAction::Stay.index());
        if out.partner_action != Move::Stay {
            acts.push(t);
        }
    }
    let gap = v.max(1);
    rep.checked = horizon as usize;
    if let Some(w) = acts.windows(2).find(|w| w[1] - w[0] < gap) {
        rep.fail(format!("v = {v}: partner acted at {} and {}", w[0], w[1]));
    }
    let bound = horizon.div_ceil(gap) as usize;
    if acts.len() > bound {
        rep.fail(format!("v = {v}: {} actions in {horizon} steps exceed {bound}", acts.len()));
    }
    Ok(rep)
}

/// Two runs from the same seed under the same action sequence must produce
/// bit-identical observations, rewards and partner actions.
pub fn determinism(spec: &EnvSpec, traits: PartnerTraits, seed: u64) -> Result<AuditReport> {
    let run = || -> Result<Vec<(Vec<u32>, u32, Move)>> {
        let mut env = spec.build(EnvOptions::default())?;
        env.reset(traits, seed);
        let mut r = rng::stream(seed, Purpose::Actions, 0);
        let mut out = Vec::new();
        loop {
            let tr = env.step(rng::index(&mut r, env.num_actions()));
            out.push((env.observation().iter().map(|v| v.to_bits()).collect(), tr.reward.to_bits(), tr.partner_action));
            if tr.done {
                return Ok(out);
            }
        }
    };
    let (a, b) = (run()?, run()?);
    let mut rep = AuditReport { checked: a.len(), violations: Vec::new() };
    if let Some(t) = a.iter().zip(&b).position(|(x, y)| x != y) {
        rep.fail(format!("{} diverged at step {t}", spec.name()));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_board_is_clean() {
        let r = coingame_exhaustive(3);
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.checked, 9 * 8 * 7 * 6 * 2 * 6 * 6);
    }

    #[test]
    fn cooldown_bound_holds() {
        for v in [0, 1, 2, 3, 8, 10] {
            let r = cooldown_gating("cramped_room", v, 200, 3).unwrap();
            assert!(r.passed(), "{:?}", r.violations);
        }
    }
}
