//! Two-agent coin collection with a mode-following partner.

use serde::{Deserialize, Serialize};

use super::layout::{Layout, Pos};
use super::{Agent, Move};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colour {
    Red,
    Blue,
}

impl Colour {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> Colour {
        match self {
            Colour::Red => Colour::Blue,
            Colour::Blue => Colour::Red,
        }
    }

    pub fn from_index(i: usize) -> Colour {
        if i == 0 {
            Colour::Red
        } else {
            Colour::Blue
        }
    }
}

/// Ego action set for the coin game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoinAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
    ToggleMode,
}

impl CoinAction {
    pub const COUNT: usize = 6;
    pub const ALL: [CoinAction; 6] =
        [CoinAction::Up, CoinAction::Down, CoinAction::Left, CoinAction::Right, CoinAction::Stay, CoinAction::ToggleMode];

    pub fn from_index(i: usize) -> CoinAction {
        Self::ALL[i]
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinRules {
    pub horizon: u32,
    /// When false, `ToggleMode` is a no-op.
    pub influence: bool,
    /// Step at which the partner mode flips regardless of the ego agent.
    pub toggle_at: Option<u32>,
}

impl Default for CoinRules {
    fn default() -> Self {
        CoinRules { horizon: 128, influence: true, toggle_at: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinGameState {
    /// Ego first, partner second.
    pub agents: [Pos; 2],
    /// Red coin, then blue coin.
    pub coins: [Pos; 2],
    pub coins_collected: u32,
    pub mode: Colour,
    pub t: u32,
    #[serde(skip, default = "default_rng")]
    pub rng: StreamRng,
}

fn default_rng() -> StreamRng {
    rng::stream(0, rng::Purpose::Coins, 0)
}

impl CoinGameState {
    pub fn coin(&self, c: Colour) -> Pos {
        self.coins[c.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinEvent {
    pub agent: Agent,
    pub colour: Colour,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoinStep {
    /// +1 per coin collected by either agent.
    pub reward: f32,
    pub done: bool,
    pub ego_effective: CoinAction,
    pub collected: Vec<CoinEvent>,
    pub toggled: bool,
}

/// Uniform free cell not covered by an agent or an entry of `taken`.
pub fn free_cell(layout: &Layout, blocked: &[Pos], rng: &mut StreamRng) -> Pos {
    let free: Vec<Pos> = layout.floor_cells().into_iter().filter(|p| !blocked.contains(p)).collect();
    free[rng::index(rng, free.len())]
}

/// Advances the coin game by one tick: toggle schedule, ego move, partner
/// move, then collection and respawn.
pub fn step_coingame(layout: &Layout, rules: &CoinRules, state: &mut CoinGameState, ego: CoinAction, partner: Move) -> CoinStep {
    let mut toggled = false;
    if rules.toggle_at == Some(state.t) {
        state.mode = state.mode.other();
        toggled = true;
    }
    let mut ego = ego;
    if ego == CoinAction::ToggleMode && !rules.influence {
        ego = CoinAction::Stay;
    }
    match ego {
        CoinAction::ToggleMode => {
            state.mode = state.mode.other();
            toggled = true;
        }
        CoinAction::Stay => {}
        m => move_agent(layout, state, 0, Move::ALL[m.index()]),
    }
    move_agent(layout, state, 1, partner);

    let mut collected = Vec::new();
    for agent in [Agent::Ego, Agent::Partner] {
        let p = state.agents[agent.index()];
        if let Some(ci) = state.coins.iter().position(|&c| c == p) {
            let colour = Colour::from_index(ci);
            collected.push(CoinEvent { agent, colour });
            let mut blocked = state.agents.to_vec();
            blocked.push(state.coins[1 - ci]);
            state.coins[ci] = free_cell(layout, &blocked, &mut state.rng);
        }
    }
    state.coins_collected += collected.len() as u32;
    state.t += 1;
    CoinStep { reward: collected.len() as f32, done: state.t >= rules.horizon, ego_effective: ego, collected, toggled }
}

fn move_agent(layout: &Layout, state: &mut CoinGameState, i: usize, m: Move) {
    if let Some(dir) = m.dir() {
        let target = state.agents[i].step(dir);
        if layout.is_floor(target) && target != state.agents[1 - i] {
            state.agents[i] = target;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(ego: Pos, partner: Pos, red: Pos, blue: Pos) -> CoinGameState {
        CoinGameState {
            agents: [ego, partner],
            coins: [red, blue],
            coins_collected: 0,
            mode: Colour::Red,
            t: 0,
            rng: rng::stream(3, rng::Purpose::Coins, 0),
        }
    }

    #[test]
    fn ego_collects_red_and_it_respawns() {
        let l = Layout::open("cg", 5, 5);
        let mut s = state(Pos::new(0, 0), Pos::new(4, 4), Pos::new(1, 0), Pos::new(3, 3));
        let out = step_coingame(&l, &CoinRules::default(), &mut s, CoinAction::Right, Move::Stay);
        assert_eq!(out.reward, 1.0);
        assert_ne!(s.coins[0], Pos::new(1, 0));
        assert!(!s.agents.contains(&s.coins[0]));
        assert_ne!(s.coins[0], s.coins[1]);
    }

    #[test]
    fn toggle_flips_mode_only() {
        let l = Layout::open("cg", 5, 5);
        let mut s = state(Pos::new(0, 0), Pos::new(4, 4), Pos::new(2, 2), Pos::new(3, 3));
        step_coingame(&l, &CoinRules::default(), &mut s, CoinAction::ToggleMode, Move::Stay);
        assert_eq!(s.mode, Colour::Blue);
        assert_eq!(s.agents, [Pos::new(0, 0), Pos::new(4, 4)]);
    }

    #[test]
    fn simultaneous_collection_brute_force() {
        // Every placement where the ego steps right onto one coin and the
        // partner steps left onto the other yields exactly two coins.
        let l = Layout::open("cg", 5, 5);
        let mut checked = 0;
        for ey in 0..5 {
            for ex in 0..4 {
                for py in 0..5 {
                    for px in 1..5 {
                        let ego = Pos::new(ex, ey);
                        let partner = Pos::new(px, py);
                        let ego_to = Pos::new(ex + 1, ey);
                        let partner_to = Pos::new(px - 1, py);
                        if ego == partner || ego_to == partner_to || ego_to == partner || partner_to == ego {
                            continue;
                        }
                        for swap in [false, true] {
                            let (red, blue) = if swap { (partner_to, ego_to) } else { (ego_to, partner_to) };
                            let mut s = state(ego, partner, red, blue);
                            let out = step_coingame(&l, &CoinRules::default(), &mut s, CoinAction::Right, Move::Left);
                            assert_eq!(out.reward, 2.0);
                            assert_eq!(s.coins_collected, 2);
                            assert!(!s.agents.contains(&s.coins[0]) && !s.agents.contains(&s.coins[1]));
                            assert_ne!(s.coins[0], s.coins[1]);
                            checked += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 100);
    }
}
