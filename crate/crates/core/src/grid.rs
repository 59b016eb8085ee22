//! The Four Rooms gridworld: layout, deterministic dynamics and the behavior policies.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_LAYOUT: &str = include_str!("../data/four_rooms.toml");

/// Probability of the biased action at a blue state in the high-variance variant.
pub const BIASED_PROB: f64 = 0.97;
/// Probability of each of the three other actions at a blue state.
pub const UNBIASED_PROB: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: u8,
    pub y: u8,
}

impl Cell {
    pub const fn new(x: u8, y: u8) -> Self {
        Cell { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Left,
    Right,
    Up,
    Down,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Left, Action::Right, Action::Up, Action::Down];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Up => (0, 1),
            Action::Down => (0, -1),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Left => "left",
            Action::Right => "right",
            Action::Up => "up",
            Action::Down => "down",
        };
        f.write_str(s)
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Action::Left),
            "right" => Ok(Action::Right),
            "up" => Ok(Action::Up),
            "down" => Ok(Action::Down),
            other => Err(Error::Format(format!("unknown action `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Rooms,
    HighVarianceRooms,
}

impl Variant {
    /// Short name used on the command line and in the result store.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::Rooms => "rooms",
            Variant::HighVarianceRooms => "hv-rooms",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rooms" => Ok(Variant::Rooms),
            "hv-rooms" | "hv_rooms" | "high-variance-rooms" => Ok(Variant::HighVarianceRooms),
            other => Err(Error::UnknownTask(other.to_string())),
        }
    }
}

/// On-disk description of a layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub width: u8,
    pub height: u8,
    pub walls: Vec<[u8; 2]>,
    pub hallways: Vec<[u8; 2]>,
    #[serde(default)]
    pub blue_states: Vec<BlueState>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlueState {
    pub cell: [u8; 2],
    pub action: Action,
}

impl GridFile {
    pub fn default_layout() -> GridFile {
        toml::from_str(DEFAULT_LAYOUT).expect("shipped layout parses")
    }

    pub fn parse(text: &str) -> Result<GridFile> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<GridFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GridFile::parse(&text)
    }
}

/// An immutable gridworld layout together with the task variant.
#[derive(Clone, Debug)]
pub struct GridSpec {
    width: u8,
    height: u8,
    variant: Variant,
    open: Vec<bool>,
    /// Open cells in row-major order (bottom row first); position is the state index.
    states: Vec<Cell>,
    state_index: Vec<Option<usize>>,
    hallways: Vec<Cell>,
    rooms: Vec<Vec<Cell>>,
    room_of: Vec<Option<usize>>,
    blue_states: Vec<(Cell, Action)>,
    /// Behavior probabilities per state index.
    behavior: Vec<[f64; 4]>,
}

/// Builds the shipped Four Rooms layout for `variant`.
pub fn build_grid(variant: Variant) -> GridSpec {
    GridSpec::from_file(&GridFile::default_layout(), variant).expect("shipped layout is valid")
}

impl GridSpec {
    pub fn from_file(file: &GridFile, variant: Variant) -> Result<GridSpec> {
        let (w, h) = (file.width, file.height);
        if w == 0 || h == 0 {
            return Err(Error::Layout("grid must be non-empty".into()));
        }
        let n = w as usize * h as usize;
        let flat = |c: Cell| c.y as usize * w as usize + c.x as usize;
        let in_bounds = |c: [u8; 2]| c[0] < w && c[1] < h;

        let mut open = vec![true; n];
        for &c in &file.walls {
            if !in_bounds(c) {
                return Err(Error::Layout(format!("wall ({}, {}) out of bounds", c[0], c[1])));
            }
            open[flat(Cell::new(c[0], c[1]))] = false;
        }

        let mut hallways = Vec::new();
        for &c in &file.hallways {
            let cell = Cell::new(c[0], c[1]);
            if !in_bounds(c) || !open[flat(cell)] {
                return Err(Error::Layout(format!("hallway {cell} is not an open cell")));
            }
            if hallways.contains(&cell) {
                return Err(Error::Layout(format!("hallway {cell} listed twice")));
            }
            hallways.push(cell);
        }

        let mut states = Vec::new();
        let mut state_index = vec![None; n];
        for y in 0..h {
            for x in 0..w {
                let c = Cell::new(x, y);
                if open[flat(c)] {
                    state_index[flat(c)] = Some(states.len());
                    states.push(c);
                }
            }
        }

        let mut grid = GridSpec {
            width: w,
            height: h,
            variant,
            open,
            states,
            state_index,
            hallways,
            rooms: Vec::new(),
            room_of: vec![None; n],
            blue_states: Vec::new(),
            behavior: Vec::new(),
        };
        grid.check_connected()?;
        grid.find_rooms()?;

        for b in &file.blue_states {
            let cell = Cell::new(b.cell[0], b.cell[1]);
            let room = if in_bounds(b.cell) { grid.room_of(cell) } else { None };
            let Some(room) = room else {
                return Err(Error::Layout(format!("blue state {cell} is not a room cell")));
            };
            if grid.blue_states.iter().any(|&(c, _)| grid.room_of(c) == Some(room)) {
                return Err(Error::Layout(format!("room {room} has more than one blue state")));
            }
            grid.blue_states.push((cell, b.action));
        }

        grid.behavior = grid
            .states
            .iter()
            .map(|&s| {
                let mut p = [0.25; 4];
                if variant == Variant::HighVarianceRooms {
                    if let Some(&(_, biased)) = grid.blue_states.iter().find(|(c, _)| *c == s) {
                        p = [UNBIASED_PROB; 4];
                        p[biased.index()] = BIASED_PROB;
                    }
                }
                p
            })
            .collect();
        Ok(grid)
    }

    fn check_connected(&self) -> Result<()> {
        let Some(&start) = self.states.first() else {
            return Err(Error::Layout("no open cells".into()));
        };
        let mut seen = vec![false; self.open.len()];
        let mut queue = VecDeque::from([start]);
        seen[self.flat(start)] = true;
        let mut count = 1;
        while let Some(c) = queue.pop_front() {
            for a in Action::ALL {
                let n = self.step_unchecked(c, a);
                if !seen[self.flat(n)] {
                    seen[self.flat(n)] = true;
                    count += 1;
                    queue.push_back(n);
                }
            }
        }
        if count != self.states.len() {
            return Err(Error::Layout("open cells are not connected".into()));
        }
        Ok(())
    }

    /// Rooms are the connected components of open cells once hallways are removed.
    fn find_rooms(&mut self) -> Result<()> {
        let mut rooms: Vec<Vec<Cell>> = Vec::new();
        let mut room_of = vec![None; self.open.len()];
        for &s in &self.states {
            if self.hallways.contains(&s) || room_of[self.flat(s)].is_some() {
                continue;
            }
            let id = rooms.len();
            let mut members = vec![s];
            room_of[self.flat(s)] = Some(id);
            let mut queue = VecDeque::from([s]);
            while let Some(c) = queue.pop_front() {
                for n in self.neighbors(c) {
                    if !self.hallways.contains(&n) && room_of[self.flat(n)].is_none() {
                        room_of[self.flat(n)] = Some(id);
                        members.push(n);
                        queue.push_back(n);
                    }
                }
            }
            members.sort();
            rooms.push(members);
        }
        // States are visited bottom-up; order rooms by their smallest cell instead.
        let mut order: Vec<usize> = (0..rooms.len()).collect();
        order.sort_by_key(|&r| rooms[r][0]);
        let mut renumber = vec![0; rooms.len()];
        for (new, &old) in order.iter().enumerate() {
            renumber[old] = new;
        }
        self.rooms = order.iter().map(|&r| rooms[r].clone()).collect();
        self.room_of = room_of.into_iter().map(|r| r.map(|r| renumber[r])).collect();

        for &hw in &self.hallways {
            let adjacent = self.hallway_rooms(hw);
            if adjacent.len() != 2 {
                return Err(Error::Layout(format!(
                    "hallway {hw} touches {} rooms, expected 2",
                    adjacent.len()
                )));
            }
        }
        for room in 0..self.rooms.len() {
            let n = self.room_hallways(room).len();
            if n != 2 {
                return Err(Error::Layout(format!("room {room} has {n} hallways, expected 2")));
            }
        }
        Ok(())
    }

    fn flat(&self, c: Cell) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        Action::ALL
            .into_iter()
            .map(move |a| self.step_unchecked(c, a))
            .filter(move |&n| n != c)
    }

    fn step_unchecked(&self, s: Cell, a: Action) -> Cell {
        let (dx, dy) = a.delta();
        let x = s.x as i32 + dx;
        let y = s.y as i32 + dy;
        if x < 0 || y < 0 || x >= self.width as i32 || y >= self.height as i32 {
            return s;
        }
        let next = Cell::new(x as u8, y as u8);
        if self.open[self.flat(next)] {
            next
        } else {
            s
        }
    }

    /// Deterministic transition: move to the adjacent cell unless it is a wall or off the grid.
    pub fn step_dynamics(&self, s: Cell, a: Action) -> Result<Cell> {
        if !self.is_open(s) {
            return Err(Error::NotOpen(s));
        }
        Ok(self.step_unchecked(s, a))
    }

    pub fn behavior_prob(&self, s: Cell, a: Action) -> Result<f64> {
        let i = self.state_index(s).ok_or(Error::NotOpen(s))?;
        Ok(self.behavior[i][a.index()])
    }

    /// Behavior probabilities of all four actions at state index `i`.
    pub fn behavior_probs(&self, i: usize) -> [f64; 4] {
        self.behavior[i]
    }

    pub fn is_open(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height && self.open[self.flat(c)]
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn height(&self) -> u8 {
        self.height
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Open cells; the position of a cell in this slice is its state index.
    pub fn states(&self) -> &[Cell] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, c: Cell) -> Option<usize> {
        if c.x < self.width && c.y < self.height {
            self.state_index[self.flat(c)]
        } else {
            None
        }
    }

    /// Numbering that counts every grid position left to right, bottom to top.
    pub fn state_number(&self, c: Cell) -> usize {
        self.flat(c)
    }

    pub fn open_cells(&self) -> BTreeSet<Cell> {
        self.states.iter().copied().collect()
    }

    pub fn wall_cells(&self) -> BTreeSet<Cell> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| Cell::new(x, y)))
            .filter(|&c| !self.is_open(c))
            .collect()
    }

    pub fn hallways(&self) -> &[Cell] {
        &self.hallways
    }

    pub fn is_hallway(&self, c: Cell) -> bool {
        self.hallways.contains(&c)
    }

    pub fn rooms(&self) -> &[Vec<Cell>] {
        &self.rooms
    }

    /// Room containing `c`; hallways belong to no room.
    pub fn room_of(&self, c: Cell) -> Option<usize> {
        if c.x < self.width && c.y < self.height {
            self.room_of[self.flat(c)]
        } else {
            None
        }
    }

    /// The rooms adjacent to a hallway, in ascending order.
    pub fn hallway_rooms(&self, hw: Cell) -> Vec<usize> {
        let set: BTreeSet<usize> = self.neighbors(hw).filter_map(|n| self.room_of(n)).collect();
        set.into_iter().collect()
    }

    /// Hallways adjacent to `room`, sorted by cell.
    pub fn room_hallways(&self, room: usize) -> Vec<Cell> {
        let mut hws: Vec<Cell> = self
            .hallways
            .iter()
            .copied()
            .filter(|&hw| self.hallway_rooms(hw).contains(&room))
            .collect();
        hws.sort();
        hws
    }

    /// Blue states and their biased actions (configured for both variants, used only by HV).
    pub fn blue_states(&self) -> &[(Cell, Action)] {
        &self.blue_states
    }
}
