//! Two-agent kitchen: fetch onions, fill the single pot, cook, plate and serve.

use serde::{Deserialize, Serialize};

use super::layout::{CellKind, Dir, Layout, Pos};
use super::{Agent, Move};

/// Steps a full pot takes to cook.
pub const COOK_TIME: u8 = 20;
/// Onions per soup.
pub const POT_CAPACITY: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Nothing,
    Onion,
    Plate,
    Soup,
}

impl Item {
    pub const ALL: [Item; 4] = [Item::Nothing, Item::Onion, Item::Plate, Item::Soup];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Partner subtask: 1 = prepare ingredients, 2 = serve soup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    One,
    Two,
}

impl Task {
    pub fn index(self) -> usize {
        match self {
            Task::One => 0,
            Task::Two => 1,
        }
    }

    pub fn other(self) -> Task {
        match self {
            Task::One => Task::Two,
            Task::Two => Task::One,
        }
    }
}

/// Ego action set for the kitchen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KitchenAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
    Interact,
    SetTask1,
    SetTask2,
}

impl KitchenAction {
    pub const COUNT: usize = 8;
    pub const ALL: [KitchenAction; 8] = [
        KitchenAction::Up,
        KitchenAction::Down,
        KitchenAction::Left,
        KitchenAction::Right,
        KitchenAction::Stay,
        KitchenAction::Interact,
        KitchenAction::SetTask1,
        KitchenAction::SetTask2,
    ];

    pub fn from_index(i: usize) -> KitchenAction {
        Self::ALL[i]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_move(m: Move) -> KitchenAction {
        Self::ALL[m.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub pos: Pos,
    pub facing: Dir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KitchenEventKind {
    OnionPicked,
    OnionReturned,
    OnionInPot,
    CookStart,
    PlatePicked,
    PlateReturned,
    SoupPicked,
    SoupDelivered,
    TaskSet,
    TaskToggled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KitchenEvent {
    pub agent: Agent,
    pub kind: KitchenEventKind,
}

/// Fixed rules of one kitchen episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KitchenRules {
    pub horizon: u32,
    pub cook_time: u8,
    /// Minimum steps between the ego agent's non-stay actions.
    pub ego_cooldown: u32,
    /// When false, `SetTask*` actions are no-ops.
    pub influence: bool,
    /// Step at which the assignment flips regardless of the ego agent.
    pub toggle_at: Option<u32>,
}

impl Default for KitchenRules {
    fn default() -> Self {
        KitchenRules { horizon: 400, cook_time: COOK_TIME, ego_cooldown: 2, influence: true, toggle_at: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KitchenState {
    /// Ego first, partner second.
    pub agents: [Pose; 2],
    pub held: [Item; 2],
    pub pot_onions: u8,
    /// Steps until a full pot is ready; 0 with a full pot means ready.
    pub cook_timer: u8,
    pub soups_delivered: u32,
    pub t: u32,
    pub assignment: Task,
    /// Step of each agent's last non-stay action.
    pub last_act: [Option<u32>; 2],
}

impl KitchenState {
    pub fn pot_ready(&self) -> bool {
        self.pot_onions == POT_CAPACITY && self.cook_timer == 0
    }

    pub fn cooking(&self) -> bool {
        self.pot_onions == POT_CAPACITY && self.cook_timer > 0
    }

    /// Whether the ego agent may take a non-stay action this step.
    pub fn ego_ready(&self, rules: &KitchenRules) -> bool {
        ready(self.last_act[0], self.t, rules.ego_cooldown)
    }
}

/// Cooldown gate: an agent that last acted at `last` may act again at `t`.
/// A cooldown of 0 behaves like 1.
pub fn ready(last: Option<u32>, t: u32, cooldown: u32) -> bool {
    last.is_none_or(|l| t - l >= cooldown.max(1))
}

/// Outcome of one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct KitchenStep {
    /// +1 per delivered soup.
    pub reward: f32,
    pub done: bool,
    /// Ego action after gating and influence masking.
    pub ego_effective: KitchenAction,
    pub events: Vec<KitchenEvent>,
}

/// Fresh state with the given poses.
pub fn initial_state(agents: [Pose; 2]) -> KitchenState {
    KitchenState {
        agents,
        held: [Item::Nothing; 2],
        pot_onions: 0,
        cook_timer: 0,
        soups_delivered: 0,
        t: 0,
        assignment: Task::One,
        last_act: [None, None],
    }
}

/// Advances the kitchen by one tick.
///
/// Order: scheduled toggle, cooking, ego action, partner action. The ego
/// moves first, so contested cells go to the ego agent.
pub fn step_kitchen(
    layout: &Layout,
    rules: &KitchenRules,
    state: &mut KitchenState,
    ego: KitchenAction,
    partner: Move,
) -> KitchenStep {
    let mut events = Vec::new();
    let mut reward = 0.0;

    if rules.toggle_at == Some(state.t) {
        state.assignment = state.assignment.other();
        events.push(KitchenEvent { agent: Agent::Ego, kind: KitchenEventKind::TaskToggled });
    }
    if state.cooking() {
        state.cook_timer -= 1;
    }

    let mut ego = ego;
    if ego != KitchenAction::Stay && !state.ego_ready(rules) {
        ego = KitchenAction::Stay;
    }
    if !rules.influence && matches!(ego, KitchenAction::SetTask1 | KitchenAction::SetTask2) {
        ego = KitchenAction::Stay;
    }
    match ego {
        KitchenAction::SetTask1 | KitchenAction::SetTask2 => {
            state.assignment = if ego == KitchenAction::SetTask1 { Task::One } else { Task::Two };
            events.push(KitchenEvent { agent: Agent::Ego, kind: KitchenEventKind::TaskSet });
        }
        other => {
            let m = Move::ALL[other.index()];
            reward += apply_move(layout, rules, state, Agent::Ego, m, &mut events);
        }
    }
    if ego != KitchenAction::Stay {
        state.last_act[0] = Some(state.t);
    }

    reward += apply_move(layout, rules, state, Agent::Partner, partner, &mut events);
    if partner != Move::Stay {
        state.last_act[1] = Some(state.t);
    }

    state.t += 1;
    KitchenStep { reward, done: state.t >= rules.horizon, ego_effective: ego, events }
}

fn apply_move(
    layout: &Layout,
    rules: &KitchenRules,
    state: &mut KitchenState,
    agent: Agent,
    m: Move,
    events: &mut Vec<KitchenEvent>,
) -> f32 {
    let i = agent.index();
    match m {
        Move::Stay => 0.0,
        Move::Interact => interact(layout, rules, state, agent, events),
        _ => {
            let dir = m.dir().unwrap();
            let pose = &mut state.agents[i];
            pose.facing = dir;
            let target = pose.pos.step(dir);
            let other = state.agents[1 - i].pos;
            if layout.is_floor(target) && target != other {
                state.agents[i].pos = target;
            }
            0.0
        }
    }
}

fn interact(layout: &Layout, rules: &KitchenRules, state: &mut KitchenState, agent: Agent, events: &mut Vec<KitchenEvent>) -> f32 {
    let i = agent.index();
    let pose = state.agents[i];
    let facing = pose.pos.step(pose.facing);
    let held = state.held[i];
    let mut emit = |kind| events.push(KitchenEvent { agent, kind });
    match (layout.cell(facing), held) {
        (CellKind::OnionPile, Item::Nothing) => {
            state.held[i] = Item::Onion;
            emit(KitchenEventKind::OnionPicked);
        }
        (CellKind::OnionPile, Item::Onion) => {
            state.held[i] = Item::Nothing;
            emit(KitchenEventKind::OnionReturned);
        }
        (CellKind::PlatePile, Item::Nothing) => {
            state.held[i] = Item::Plate;
            emit(KitchenEventKind::PlatePicked);
        }
        (CellKind::PlatePile, Item::Plate) => {
            state.held[i] = Item::Nothing;
            emit(KitchenEventKind::PlateReturned);
        }
        (CellKind::Pot, Item::Onion) if state.pot_onions < POT_CAPACITY => {
            state.held[i] = Item::Nothing;
            state.pot_onions += 1;
            emit(KitchenEventKind::OnionInPot);
            if state.pot_onions == POT_CAPACITY {
                state.cook_timer = rules.cook_time;
                emit(KitchenEventKind::CookStart);
            }
        }
        (CellKind::Pot, Item::Plate) if state.pot_ready() => {
            state.held[i] = Item::Soup;
            state.pot_onions = 0;
            emit(KitchenEventKind::SoupPicked);
        }
        (CellKind::Window, Item::Soup) => {
            state.held[i] = Item::Nothing;
            state.soups_delivered += 1;
            emit(KitchenEventKind::SoupDelivered);
            return 1.0;
        }
        _ => {}
    }
    0.0
}
