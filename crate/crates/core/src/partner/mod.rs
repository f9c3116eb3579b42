//! Scripted partners with latent traits.

pub mod controller;
pub mod traits;

pub use traits::{maybe_switch, sample_traits, PartnerTraits, Phase, Profile, SwitchConfig, TraitDistribution};

use crate::env::coingame::CoinGameState;
use crate::env::kitchen::{ready, KitchenState, Task};
use crate::env::layout::Layout;
use crate::env::{EnvState, Move};
use crate::rng::{self, StreamRng};

/// Kitchen partner step.
///
/// Cooldown partners stay until `v[assignment]` steps have passed since
/// their last non-stay action, then run the assigned subtask controller.
/// Noisy partners take a uniformly random action with probability `p` and
/// otherwise run the subtask-1 controller.
pub fn kitchen_partner_act(layout: &Layout, state: &KitchenState, traits: &PartnerTraits, rng: &mut StreamRng) -> Move {
    match traits.profile {
        Profile::Cooldown { v } => {
            if !ready(state.last_act[1], state.t, v[state.assignment.index()]) {
                return Move::Stay;
            }
            controller::subtask_action(layout, state, state.assignment)
        }
        Profile::Noisy { p } => {
            let u = rng::unit_f64(rng);
            let random = Move::ALL[rng::index(rng, Move::ALL.len())];
            if u < p {
                random
            } else {
                controller::subtask_action(layout, state, Task::One)
            }
        }
        Profile::Skill { .. } => Move::Stay,
    }
}

/// Coin game partner step: with probability `s[mode]` a greedy step toward
/// the coin of the current mode's colour, otherwise stay.
pub fn coin_partner_act(layout: &Layout, state: &CoinGameState, traits: &PartnerTraits, rng: &mut StreamRng) -> Move {
    let u = rng::unit_f64(rng);
    let Profile::Skill { s } = traits.profile else { return Move::Stay };
    if u < s[state.mode.index()] {
        controller::greedy_step(layout, state.agents[1], state.coin(state.mode), state.agents[0])
    } else {
        Move::Stay
    }
}

/// Partner step for either environment.
pub fn partner_act(layout: &Layout, state: &EnvState, traits: &PartnerTraits, rng: &mut StreamRng) -> Move {
    match state {
        EnvState::Kitchen(s) => kitchen_partner_act(layout, s, traits, rng),
        EnvState::CoinGame(s) => coin_partner_act(layout, s, traits, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::coingame::{step_coingame, CoinAction, CoinRules, Colour};
    use crate::env::kitchen::{initial_state, step_kitchen, KitchenAction, KitchenRules, Pose};
    use crate::env::layout::{kitchen_layout, Dir, Pos};

    fn kitchen_run(v: [u32; 2], steps: u32) -> Vec<bool> {
        let layout = kitchen_layout("fivebyfive").unwrap();
        let mut s = initial_state([
            Pose { pos: Pos::new(3, 3), facing: Dir::Up },
            Pose { pos: Pos::new(1, 1), facing: Dir::Up },
        ]);
        let traits = PartnerTraits::new(Profile::Cooldown { v });
        let mut rng = rng::stream(0, rng::Purpose::Partner, 0);
        let rules = KitchenRules { horizon: steps, ..Default::default() };
        (0..steps)
            .map(|_| {
                let m = kitchen_partner_act(&layout, &s, &traits, &mut rng);
                step_kitchen(&layout, &rules, &mut s, KitchenAction::Stay, m);
                m != Move::Stay
            })
            .collect()
    }

    #[test]
    fn cooldown_four_acts_on_lattice() {
        let acted = kitchen_run([4, 2], 60);
        let times: Vec<usize> = acted.iter().enumerate().filter(|(_, &a)| a).map(|(t, _)| t).collect();
        assert!(!times.is_empty());
        for w in times.windows(2) {
            assert!(w[1] - w[0] >= 4, "{times:?}");
        }
        assert_eq!(times[0], 0);
    }

    #[test]
    fn cooldown_window_bound_holds() {
        for v in [1u32, 2, 3, 4, 7, 9, 0] {
            let acted = kitchen_run([v, v], 400);
            let step = v.max(1) as usize;
            for len in [1usize, 5, 17, 50] {
                for start in 0..acted.len() - len {
                    let n = acted[start..start + len].iter().filter(|&&a| a).count();
                    assert!(n <= len.div_ceil(step), "v={v} len={len} n={n}");
                }
            }
        }
    }

    #[test]
    fn zero_skill_partner_never_moves() {
        let layout = Layout::open("cg", 5, 5);
        let mut s = CoinGameState {
            agents: [Pos::new(0, 0), Pos::new(4, 4)],
            coins: [Pos::new(2, 2), Pos::new(1, 3)],
            coins_collected: 0,
            mode: Colour::Blue,
            t: 0,
            rng: rng::stream(1, rng::Purpose::Coins, 0),
        };
        let traits = PartnerTraits::new(Profile::Skill { s: [1.0, 0.0] });
        let mut rng = rng::stream(1, rng::Purpose::Partner, 0);
        for _ in 0..500 {
            let m = coin_partner_act(&layout, &s, &traits, &mut rng);
            assert_eq!(m, Move::Stay);
            step_coingame(&layout, &CoinRules { horizon: 1000, ..Default::default() }, &mut s, CoinAction::Stay, m);
        }
    }

    #[test]
    fn fully_random_partner_is_uniform() {
        // Chi-square goodness of fit over the six partner actions.
        let layout = kitchen_layout("cramped_room").unwrap();
        let s = initial_state([
            Pose { pos: Pos::new(1, 1), facing: Dir::Up },
            Pose { pos: Pos::new(3, 1), facing: Dir::Up },
        ]);
        let traits = PartnerTraits::new(Profile::Noisy { p: 1.0 });
        let mut rng = rng::stream(9, rng::Purpose::Partner, 0);
        let mut counts = [0f64; 6];
        for _ in 0..10_000 {
            counts[kitchen_partner_act(&layout, &s, &traits, &mut rng).index()] += 1.0;
        }
        let expected = 10_000.0 / 6.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 0.1% critical value of chi-square with 5 degrees of freedom.
        assert!(chi2 < 20.515, "chi2 {chi2}, counts {counts:?}");
    }
}
