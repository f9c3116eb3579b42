//! Grid layouts and their ASCII format.
//!
//! One character per cell:
//!
//! | char | cell            |
//! |------|-----------------|
//! | ` `  | floor           |
//! | `X`  | counter         |
//! | `#`  | wall            |
//! | `O`  | onion pile      |
//! | `P`  | pot             |
//! | `D`  | plate pile      |
//! | `S`  | serving window  |
//! | `1`  | spawn (floor)   |
//! | `2`  | spawn (floor)   |

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported side length. Egocentric views are `2 * MAX_SIDE - 1` wide.
pub const MAX_SIDE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }

    pub fn step(self, dir: Dir) -> Pos {
        let (dx, dy) = dir.delta();
        Pos::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: Pos) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    Up,
    Down,
    Left,
    Right,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Up, Dir::Down, Dir::Left, Dir::Right];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir::Up => (0, -1),
            Dir::Down => (0, 1),
            Dir::Left => (-1, 0),
            Dir::Right => (1, 0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Floor,
    Counter,
    OnionPile,
    Pot,
    PlatePile,
    Window,
    Wall,
}

impl CellKind {
    fn from_char(c: char) -> Option<(CellKind, Option<usize>)> {
        Some(match c {
            ' ' => (CellKind::Floor, None),
            'X' => (CellKind::Counter, None),
            '#' => (CellKind::Wall, None),
            'O' => (CellKind::OnionPile, None),
            'P' => (CellKind::Pot, None),
            'D' => (CellKind::PlatePile, None),
            'S' => (CellKind::Window, None),
            '1' => (CellKind::Floor, Some(0)),
            '2' => (CellKind::Floor, Some(1)),
            _ => return None,
        })
    }

    fn to_char(self) -> char {
        match self {
            CellKind::Floor => ' ',
            CellKind::Counter => 'X',
            CellKind::Wall => '#',
            CellKind::OnionPile => 'O',
            CellKind::Pot => 'P',
            CellKind::PlatePile => 'D',
            CellKind::Window => 'S',
        }
    }

    /// Cells an agent interacts with.
    pub fn is_functional(self) -> bool {
        matches!(self, CellKind::OnionPile | CellKind::Pot | CellKind::PlatePile | CellKind::Window)
    }
}

/// A validated rectangular grid with two spawn points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub name: String,
    pub width: usize,
    pub height: usize,
    cells: Vec<CellKind>,
    pub spawns: [Pos; 2],
}

impl Layout {
    /// Parses and validates an ASCII layout.
    pub fn parse(name: &str, ascii: &str) -> Result<Layout> {
        let mut rows: Vec<&str> = ascii.split('\n').map(|r| r.strip_suffix('\r').unwrap_or(r)).collect();
        if rows.last().is_some_and(|r| r.is_empty()) {
            rows.pop();
        }
        if rows.is_empty() {
            return Err(Error::Layout("empty layout".into()));
        }
        let width = rows[0].chars().count();
        if width == 0 || rows.iter().any(|r| r.chars().count() != width) {
            return Err(Error::Layout("non-rectangular layout".into()));
        }
        let height = rows.len();
        if width > MAX_SIDE || height > MAX_SIDE {
            return Err(Error::Layout(format!("layout {width}x{height} exceeds {MAX_SIDE}x{MAX_SIDE}")));
        }

        let mut cells = Vec::with_capacity(width * height);
        let mut spawns: [Vec<Pos>; 2] = [Vec::new(), Vec::new()];
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                let (kind, spawn) = CellKind::from_char(c)
                    .ok_or_else(|| Error::Layout(format!("unknown cell character {c:?} at ({x},{y})")))?;
                if let Some(i) = spawn {
                    spawns[i].push(Pos::new(x as i32, y as i32));
                }
                cells.push(kind);
            }
        }
        if spawns[0].len() != 1 || spawns[1].len() != 1 {
            return Err(Error::Layout("expected exactly two spawn points `1` and `2`".into()));
        }
        let layout = Layout { name: name.to_string(), width, height, cells, spawns: [spawns[0][0], spawns[1][0]] };
        layout.check_reachability()?;
        Ok(layout)
    }

    /// Open floor grid with spawns in opposite corners.
    pub fn open(name: &str, width: usize, height: usize) -> Layout {
        assert!(width >= 2 && height >= 1 && width <= MAX_SIDE && height <= MAX_SIDE);
        Layout {
            name: name.to_string(),
            width,
            height,
            cells: vec![CellKind::Floor; width * height],
            spawns: [Pos::new(0, 0), Pos::new(width as i32 - 1, height as i32 - 1)],
        }
    }

    fn check_reachability(&self) -> Result<()> {
        let from = [self.distances(self.spawns[0]), self.distances(self.spawns[1])];
        for (i, kind) in self.cells.iter().enumerate() {
            if !kind.is_functional() {
                continue;
            }
            let p = self.pos_of(i);
            let reachable = |d: &Vec<Option<u32>>| {
                Dir::ALL.iter().any(|&dir| self.index_of(p.step(dir)).is_some_and(|j| d[j].is_some()))
            };
            if !(reachable(&from[0]) && reachable(&from[1])) {
                return Err(Error::Layout(format!("unreachable functional cell {:?} at ({},{})", kind, p.x, p.y)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    pub fn index_of(&self, p: Pos) -> Option<usize> {
        self.contains(p).then(|| p.y as usize * self.width + p.x as usize)
    }

    pub fn pos_of(&self, index: usize) -> Pos {
        Pos::new((index % self.width) as i32, (index / self.width) as i32)
    }

    /// Cell kind at `p`; outside the grid reads as wall.
    pub fn cell(&self, p: Pos) -> CellKind {
        self.index_of(p).map_or(CellKind::Wall, |i| self.cells[i])
    }

    pub fn is_floor(&self, p: Pos) -> bool {
        self.cell(p) == CellKind::Floor
    }

    pub fn cells(&self) -> &[CellKind] {
        &self.cells
    }

    pub fn floor_cells(&self) -> Vec<Pos> {
        (0..self.cells.len()).filter(|&i| self.cells[i] == CellKind::Floor).map(|i| self.pos_of(i)).collect()
    }

    pub fn cells_of(&self, kind: CellKind) -> Vec<Pos> {
        (0..self.cells.len()).filter(|&i| self.cells[i] == kind).map(|i| self.pos_of(i)).collect()
    }

    /// BFS step distances over floor cells from `start`.
    pub fn distances(&self, start: Pos) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.cells.len()];
        let Some(s) = self.index_of(start) else { return dist };
        if self.cells[s] != CellKind::Floor {
            return dist;
        }
        dist[s] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            let d = dist[self.index_of(p).unwrap()].unwrap();
            for dir in Dir::ALL {
                let q = p.step(dir);
                if let Some(j) = self.index_of(q) {
                    if self.cells[j] == CellKind::Floor && dist[j].is_none() {
                        dist[j] = Some(d + 1);
                        queue.push_back(q);
                    }
                }
            }
        }
        dist
    }

    /// Renders back to the ASCII format.
    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let p = Pos::new(x as i32, y as i32);
                let c = match self.spawns.iter().position(|&s| s == p) {
                    Some(0) => '1',
                    Some(_) => '2',
                    None => self.cell(p).to_char(),
                };
                out.push(c);
            }
            out.push('\n');
        }
        out
    }
}

/// Names of the shipped kitchen layouts.
pub const KITCHEN_LAYOUTS: [&str; 5] = ["cramped_room", "fivebyfive", "coord_ring", "cramped_room_v3", "cramped_room_v4"];

/// Loads one of the shipped kitchen layouts.
pub fn kitchen_layout(name: &str) -> Result<Layout> {
    let ascii = match name {
        "cramped_room" => include_str!("../../layouts/cramped_room.layout"),
        "fivebyfive" => include_str!("../../layouts/fivebyfive.layout"),
        "coord_ring" => include_str!("../../layouts/coord_ring.layout"),
        "cramped_room_v3" => include_str!("../../layouts/cramped_room_v3.layout"),
        "cramped_room_v4" => include_str!("../../layouts/cramped_room_v4.layout"),
        _ => return Err(Error::Config(format!("unknown layout `{name}`"))),
    };
    Layout::parse(name, ascii)
}
