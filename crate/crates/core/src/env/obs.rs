//! Observation encoding.
//!
//! Full observations are an egocentric `VIEW x VIEW` grid stored
//! channel-last (`(row * VIEW + col) * channels + channel`) followed by a
//! short flat tail. The ego agent always sits in the centre cell; cells
//! outside the layout read as zero except for the out-of-bounds channel.
//!
//! Blind observations carry only the ego agent's own cell: position one-hot,
//! orientation one-hot and held-item one-hot (kitchen), or position only
//! (coin game).

use serde::{Deserialize, Serialize};

use super::coingame::CoinGameState;
use super::kitchen::{Item, KitchenRules, KitchenState, POT_CAPACITY};
use super::layout::{CellKind, Layout, Pos, MAX_SIDE};

pub const VIEW: usize = 2 * MAX_SIDE - 1;
const CENTRE: i32 = (VIEW / 2) as i32;

pub const KITCHEN_CHANNELS: usize = 21;
pub const KITCHEN_FLAT: usize = 11;
pub const COIN_CHANNELS: usize = 5;
pub const COIN_FLAT: usize = 2;
pub const KITCHEN_BLIND_DIM: usize = MAX_SIDE * MAX_SIDE + 4 + 4;
pub const COIN_BLIND_DIM: usize = MAX_SIDE * MAX_SIDE;

// Kitchen channel indices.
const K_SELF: usize = 0;
const K_PARTNER: usize = 1;
const K_CELL: usize = 2; // counter, onion pile, pot, plate pile, window, wall/out-of-bounds
const K_OOB: usize = 7;
const K_PARTNER_ITEM: usize = 8; // onion, plate, soup
const K_POT_ONIONS: usize = 11; // 0..=3
const K_COOKING: usize = 15;
const K_READY: usize = 16;
const K_PARTNER_FACING: usize = 17;

// Coin channel indices.
const C_SELF: usize = 0;
const C_PARTNER: usize = 1;
const C_RED: usize = 2;
const C_BLUE: usize = 3;
const C_OOB: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObsMode {
    #[default]
    Full,
    Blind,
}

/// Shape of an encoded observation: optional egocentric grid plus flat tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsShape {
    /// `(height, width, channels)` of the grid part.
    pub grid: Option<(usize, usize, usize)>,
    pub flat: usize,
}

impl ObsShape {
    pub fn grid_len(&self) -> usize {
        self.grid.map_or(0, |(h, w, c)| h * w * c)
    }

    pub fn dim(&self) -> usize {
        self.grid_len() + self.flat
    }

    pub fn kitchen(mode: ObsMode) -> ObsShape {
        match mode {
            ObsMode::Full => ObsShape { grid: Some((VIEW, VIEW, KITCHEN_CHANNELS)), flat: KITCHEN_FLAT },
            ObsMode::Blind => ObsShape { grid: None, flat: KITCHEN_BLIND_DIM },
        }
    }

    pub fn coingame(mode: ObsMode) -> ObsShape {
        match mode {
            ObsMode::Full => ObsShape { grid: Some((VIEW, VIEW, COIN_CHANNELS)), flat: COIN_FLAT },
            ObsMode::Blind => ObsShape { grid: None, flat: COIN_BLIND_DIM },
        }
    }
}

/// An encoded observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub mode: ObsMode,
    pub shape: ObsShape,
    pub data: Vec<f32>,
}

fn view_cell(ego: Pos, p: Pos) -> Option<usize> {
    let vx = p.x - ego.x + CENTRE;
    let vy = p.y - ego.y + CENTRE;
    ((0..VIEW as i32).contains(&vx) && (0..VIEW as i32).contains(&vy)).then(|| vy as usize * VIEW + vx as usize)
}

fn mark_out_of_bounds(layout: &Layout, ego: Pos, channels: usize, oob: usize, out: &mut [f32]) {
    for vy in 0..VIEW as i32 {
        for vx in 0..VIEW as i32 {
            let p = Pos::new(ego.x + vx - CENTRE, ego.y + vy - CENTRE);
            if !layout.contains(p) {
                out[(vy as usize * VIEW + vx as usize) * channels + oob] = 1.0;
            }
        }
    }
}

/// Writes the kitchen observation for the ego agent into `out`.
pub fn encode_kitchen(layout: &Layout, rules: &KitchenRules, state: &KitchenState, mode: ObsMode, out: &mut [f32]) {
    out.fill(0.0);
    let ego = state.agents[0];
    match mode {
        ObsMode::Blind => {
            let side = MAX_SIDE;
            out[ego.pos.y as usize * side + ego.pos.x as usize] = 1.0;
            out[side * side + ego.facing.index()] = 1.0;
            out[side * side + 4 + state.held[0].index()] = 1.0;
        }
        ObsMode::Full => {
            let ch = KITCHEN_CHANNELS;
            mark_out_of_bounds(layout, ego.pos, ch, K_OOB, out);
            for (i, &kind) in layout.cells().iter().enumerate() {
                let p = layout.pos_of(i);
                let Some(v) = view_cell(ego.pos, p) else { continue };
                let base = v * ch;
                let c = match kind {
                    CellKind::Floor => None,
                    CellKind::Counter => Some(0),
                    CellKind::OnionPile => Some(1),
                    CellKind::Pot => Some(2),
                    CellKind::PlatePile => Some(3),
                    CellKind::Window => Some(4),
                    CellKind::Wall => Some(5),
                };
                if let Some(c) = c {
                    out[base + K_CELL + c] = 1.0;
                }
                if kind == CellKind::Pot {
                    out[base + K_POT_ONIONS + state.pot_onions.min(POT_CAPACITY) as usize] = 1.0;
                    if state.cooking() {
                        out[base + K_COOKING] = 1.0;
                    }
                    if state.pot_ready() {
                        out[base + K_READY] = 1.0;
                    }
                }
            }
            let centre = view_cell(ego.pos, ego.pos).unwrap() * ch;
            out[centre + K_SELF] = 1.0;
            let partner = state.agents[1];
            if let Some(v) = view_cell(ego.pos, partner.pos) {
                let base = v * ch;
                out[base + K_PARTNER] = 1.0;
                out[base + K_PARTNER_FACING + partner.facing.index()] = 1.0;
                match state.held[1] {
                    Item::Nothing => {}
                    item => out[base + K_PARTNER_ITEM + item.index() - 1] = 1.0,
                }
            }
            let tail = VIEW * VIEW * ch;
            out[tail + state.held[0].index()] = 1.0;
            out[tail + 4 + ego.facing.index()] = 1.0;
            out[tail + 8 + state.assignment.index()] = 1.0;
            if state.ego_ready(rules) {
                out[tail + 10] = 1.0;
            }
        }
    }
}

/// Writes the coin game observation for the ego agent into `out`.
pub fn encode_coingame(layout: &Layout, state: &CoinGameState, mode: ObsMode, out: &mut [f32]) {
    out.fill(0.0);
    let ego = state.agents[0];
    match mode {
        ObsMode::Blind => {
            out[ego.y as usize * MAX_SIDE + ego.x as usize] = 1.0;
        }
        ObsMode::Full => {
            let ch = COIN_CHANNELS;
            mark_out_of_bounds(layout, ego, ch, C_OOB, out);
            let mut set = |p: Pos, c: usize| {
                if let Some(v) = view_cell(ego, p) {
                    out[v * ch + c] = 1.0;
                }
            };
            set(ego, C_SELF);
            set(state.agents[1], C_PARTNER);
            set(state.coins[0], C_RED);
            set(state.coins[1], C_BLUE);
            out[VIEW * VIEW * ch + state.mode.index()] = 1.0;
        }
    }
}
