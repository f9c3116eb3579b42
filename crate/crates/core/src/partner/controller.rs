//! Scripted subtask controllers: shortest path to the next waypoint, then interact.

use std::collections::VecDeque;

use crate::env::kitchen::{Item, KitchenState, Pose, Task, POT_CAPACITY};
use crate::env::layout::{CellKind, Dir, Layout, Pos};
use crate::env::Move;

/// One controller step for the partner (agent index 1) working on `task`.
pub fn subtask_action(layout: &Layout, state: &KitchenState, task: Task) -> Move {
    subtask_action_for(layout, state, 1, task)
}

/// One controller step for agent `who` working on `task`.
pub fn subtask_action_for(layout: &Layout, state: &KitchenState, who: usize, task: Task) -> Move {
    let pot_has_room = state.pot_onions < POT_CAPACITY;
    let (target, act) = match (task, state.held[who]) {
        (_, Item::Soup) => (CellKind::Window, true),
        (Task::One, Item::Onion) => (CellKind::Pot, pot_has_room),
        (Task::One, Item::Nothing) => (CellKind::OnionPile, true),
        (Task::One, Item::Plate) => (CellKind::PlatePile, true),
        (Task::Two, Item::Plate) => (CellKind::Pot, state.pot_ready()),
        (Task::Two, Item::Nothing) => (CellKind::PlatePile, true),
        (Task::Two, Item::Onion) if pot_has_room => (CellKind::Pot, true),
        (Task::Two, Item::Onion) => (CellKind::OnionPile, true),
    };
    navigate(layout, state.agents[who], state.agents[1 - who].pos, target, act)
}

fn is_access(layout: &Layout, p: Pos, target: CellKind) -> bool {
    Dir::ALL.iter().any(|&d| layout.cell(p.step(d)) == target)
}

/// Heads for the nearest cell adjacent to a `target` cell, turns to face it
/// and interacts when `act` is set. Without `act` the agent waits one step
/// short of the target so it never holds an access cell another agent needs.
pub fn navigate(layout: &Layout, me: Pose, blocker: Pos, target: CellKind, act: bool) -> Move {
    if !act {
        return wait_near(layout, me.pos, blocker, target);
    }
    if layout.cell(me.pos.step(me.facing)) == target {
        return if act { Move::Interact } else { Move::Stay };
    }
    if let Some(dir) = Dir::ALL.into_iter().find(|&d| layout.cell(me.pos.step(d)) == target) {
        // Moving into a non-floor cell only turns the agent.
        return Move::from_dir(dir);
    }
    if let Some(d) = first_step(layout, me.pos, Some(blocker), target) {
        return Move::from_dir(d);
    }
    if me.pos.manhattan(blocker) == 1 {
        return step_aside(layout, me.pos, blocker);
    }
    first_step(layout, me.pos, None, target).map_or(Move::Stay, Move::from_dir)
}

/// Clears a corridor the other agent needs by moving to any free floor cell.
fn step_aside(layout: &Layout, pos: Pos, blocker: Pos) -> Move {
    Dir::ALL
        .into_iter()
        .find(|&d| {
            let q = pos.step(d);
            layout.is_floor(q) && q != blocker
        })
        .map_or(Move::Stay, Move::from_dir)
}

fn wait_near(layout: &Layout, pos: Pos, blocker: Pos, target: CellKind) -> Move {
    if is_access(layout, pos, target) {
        return Dir::ALL
            .into_iter()
            .find(|&d| {
                let q = pos.step(d);
                layout.is_floor(q) && q != blocker && !is_access(layout, q, target)
            })
            .map_or(Move::Stay, Move::from_dir);
    }
    match first_step(layout, pos, Some(blocker), target) {
        Some(d) if !is_access(layout, pos.step(d), target) => Move::from_dir(d),
        _ => Move::Stay,
    }
}

/// First move of a shortest floor path from `start` to any cell adjacent to `target`.
fn first_step(layout: &Layout, start: Pos, blocker: Option<Pos>, target: CellKind) -> Option<Dir> {
    let n = layout.width * layout.height;
    let mut first: Vec<Option<Dir>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[layout.index_of(start)?] = true;
    let mut queue = VecDeque::new();
    for dir in Dir::ALL {
        let q = start.step(dir);
        if layout.is_floor(q) && Some(q) != blocker {
            let j = layout.index_of(q).unwrap();
            if !seen[j] {
                seen[j] = true;
                first[j] = Some(dir);
                queue.push_back(q);
            }
        }
    }
    while let Some(p) = queue.pop_front() {
        let fp = first[layout.index_of(p).unwrap()];
        if Dir::ALL.iter().any(|&d| layout.cell(p.step(d)) == target) {
            return fp;
        }
        for dir in Dir::ALL {
            let q = p.step(dir);
            if layout.is_floor(q) && Some(q) != blocker {
                let j = layout.index_of(q).unwrap();
                if !seen[j] {
                    seen[j] = true;
                    first[j] = fp;
                    queue.push_back(q);
                }
            }
        }
    }
    None
}

/// Greedy step that reduces Manhattan distance to `goal`, longer axis first,
/// avoiding non-floor cells and `blocker`.
pub fn greedy_step(layout: &Layout, from: Pos, goal: Pos, blocker: Pos) -> Move {
    let dx = goal.x - from.x;
    let dy = goal.y - from.y;
    let horizontal = (dx != 0).then_some(if dx > 0 { Dir::Right } else { Dir::Left });
    let vertical = (dy != 0).then_some(if dy > 0 { Dir::Down } else { Dir::Up });
    let order = if dx.abs() >= dy.abs() { [horizontal, vertical] } else { [vertical, horizontal] };
    order
        .into_iter()
        .flatten()
        .find(|&d| {
            let q = from.step(d);
            layout.is_floor(q) && q != blocker
        })
        .map_or(Move::Stay, Move::from_dir)
}
