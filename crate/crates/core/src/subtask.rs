//! The eight prediction sub-tasks: one per (room, hallway) pair.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{Action, Cell, GridSpec};

/// Discount returned by the termination function while the agent stays in the sub-task region.
pub const GAMMA: f64 = 0.9;

/// Per-step quantities one sub-task derives from a behavior transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Signals {
    pub rho: f64,
    pub gamma_next: f64,
    pub reward: f64,
    pub active: bool,
}

impl Signals {
    pub const INACTIVE: Signals = Signals { rho: 0.0, gamma_next: 0.0, reward: 0.0, active: false };
}

#[derive(Clone, Debug)]
pub struct SubTask {
    pub id: usize,
    pub room: usize,
    pub target_hallway: Cell,
    /// Interior of the room plus its other hallway.
    region: Vec<Cell>,
    in_region: Vec<bool>,
    /// Shortest-path distance to the target, defined on the region and the target itself.
    dist: Vec<Option<u32>>,
    policy: Vec<[f64; 4]>,
    /// Importance sampling ratio per (state index, action); zero outside the region.
    rho: Vec<[f64; 4]>,
    target_index: usize,
}

impl SubTask {
    pub fn region(&self) -> &[Cell] {
        &self.region
    }

    pub fn contains(&self, grid: &GridSpec, c: Cell) -> bool {
        grid.state_index(c).is_some_and(|i| self.in_region[i])
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.in_region[i]
    }

    pub fn interest(&self, grid: &GridSpec, c: Cell) -> f64 {
        if self.contains(grid, c) {
            1.0
        } else {
            0.0
        }
    }

    pub fn dist(&self, grid: &GridSpec, c: Cell) -> Option<u32> {
        grid.state_index(c).and_then(|i| self.dist[i])
    }

    pub fn dist_index(&self, i: usize) -> Option<u32> {
        self.dist[i]
    }

    /// Target-policy probabilities at `c`; all zero outside the region.
    pub fn target_policy(&self, grid: &GridSpec, c: Cell) -> [f64; 4] {
        grid.state_index(c).map_or([0.0; 4], |i| self.policy[i])
    }

    pub fn policy_index(&self, i: usize) -> [f64; 4] {
        self.policy[i]
    }

    pub fn rho_index(&self, i: usize, a: Action) -> f64 {
        self.rho[i][a.index()]
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    /// Signals by state index; `next` is the index of the successor state.
    #[inline]
    pub fn signals_index(&self, s: usize, a: Action, next: usize) -> Signals {
        if !self.in_region[s] {
            return Signals::INACTIVE;
        }
        let (gamma_next, reward) = if next == self.target_index {
            (0.0, 1.0)
        } else if self.in_region[next] {
            (GAMMA, 0.0)
        } else {
            (0.0, 0.0)
        };
        Signals { rho: self.rho[s][a.index()], gamma_next, reward, active: true }
    }
}

/// Two sub-tasks per room, one targeting each of the room's hallways.
///
/// Sub-task `2r + k` targets the `k`-th hallway (in cell order) of room `r`.
pub fn build_subtasks(grid: &GridSpec) -> Vec<SubTask> {
    let n = grid.num_states();
    let mut out = Vec::new();
    for room in 0..grid.rooms().len() {
        let hws = grid.room_hallways(room);
        for (k, &target) in hws.iter().enumerate() {
            let other = hws[1 - k];
            let mut in_region = vec![false; n];
            let mut region: Vec<Cell> = grid.rooms()[room].clone();
            region.push(other);
            region.sort();
            for &c in &region {
                in_region[grid.state_index(c).expect("region cells are open")] = true;
            }
            let target_index = grid.state_index(target).expect("hallways are open");

            let mut dist = vec![None; n];
            dist[target_index] = Some(0);
            let mut queue = VecDeque::from([target]);
            while let Some(c) = queue.pop_front() {
                let d = dist[grid.state_index(c).unwrap()].unwrap();
                for a in Action::ALL {
                    let nb = grid.step_dynamics(c, a).expect("open cell");
                    let j = grid.state_index(nb).unwrap();
                    if in_region[j] && dist[j].is_none() {
                        dist[j] = Some(d + 1);
                        queue.push_back(nb);
                    }
                }
            }

            let mut policy = vec![[0.0; 4]; n];
            let mut rho = vec![[0.0; 4]; n];
            for &c in &region {
                let i = grid.state_index(c).unwrap();
                let here = dist[i].expect("region is connected to its target");
                let better: Vec<Action> = Action::ALL
                    .into_iter()
                    .filter(|&a| {
                        let j = grid.state_index(grid.step_dynamics(c, a).unwrap()).unwrap();
                        dist[j].is_some_and(|d| d < here)
                    })
                    .collect();
                let p = 1.0 / better.len() as f64;
                for &a in &better {
                    policy[i][a.index()] = p;
                }
                let b = grid.behavior_probs(i);
                for a in Action::ALL {
                    rho[i][a.index()] = policy[i][a.index()] / b[a.index()];
                }
            }

            out.push(SubTask {
                id: out.len(),
                room,
                target_hallway: target,
                region,
                in_region,
                dist,
                policy,
                rho,
                target_index,
            });
        }
    }
    out
}

/// Signals of one sub-task for the behavior transition `(s, a, s_next)`.
pub fn subtask_signals(
    grid: &GridSpec,
    subtask: &SubTask,
    s: Cell,
    a: Action,
    s_next: Cell,
) -> Result<Signals> {
    let i = grid.state_index(s).ok_or(Error::NotOpen(s))?;
    let j = grid.state_index(s_next).ok_or(Error::NotOpen(s_next))?;
    Ok(subtask.signals_index(i, a, j))
}

/// From (6,10) along the top of the north-east room and down to hallway (8,4).
pub const TOP_RIGHT_PATH: [Action; 8] = [
    Action::Right,
    Action::Right,
    Action::Down,
    Action::Down,
    Action::Down,
    Action::Down,
    Action::Down,
    Action::Down,
];

/// Product of the importance sampling ratios along `path` starting at `start`.
pub fn ratio_product(grid: &GridSpec, subtask: &SubTask, start: Cell, path: &[Action]) -> Result<f64> {
    let mut s = start;
    let mut product = 1.0;
    for (step, &a) in path.iter().enumerate() {
        if !subtask.contains(grid, s) {
            return Err(Error::PathLeftRegion { step });
        }
        let next = grid.step_dynamics(s, a)?;
        product *= subtask_signals(grid, subtask, s, a, next)?.rho;
        s = next;
    }
    Ok(product)
}

/// The two sub-tasks whose regions contain `s`.
pub fn active_subtasks(grid: &GridSpec, subtasks: &[SubTask], s: Cell) -> Result<(usize, usize)> {
    let i = grid.state_index(s).ok_or(Error::NotOpen(s))?;
    let ids: Vec<usize> = subtasks.iter().filter(|t| t.in_region[i]).map(|t| t.id).collect();
    match ids[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::ActiveCount { cell: s, count: ids.len() }),
    }
}

/// Per-state lookup of the two active sub-task ids, built once per grid.
pub fn active_table(grid: &GridSpec, subtasks: &[SubTask]) -> Result<Vec<[usize; 2]>> {
    grid.states()
        .iter()
        .map(|&s| active_subtasks(grid, subtasks, s).map(|(a, b)| [a, b]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Variant};

    fn both() -> [GridSpec; 2] {
        [build_grid(Variant::Rooms), build_grid(Variant::HighVarianceRooms)]
    }

    fn subtask_targeting(tasks: &[SubTask], room: usize, target: Cell) -> &SubTask {
        tasks.iter().find(|t| t.room == room && t.target_hallway == target).unwrap()
    }

    #[test]
    fn eight_subtasks_two_per_room() {
        let g = build_grid(Variant::Rooms);
        let tasks = build_subtasks(&g);
        assert_eq!(tasks.len(), 8);
        for room in 0..4 {
            assert_eq!(tasks.iter().filter(|t| t.room == room).count(), 2);
        }
    }

    #[test]
    fn every_cell_in_exactly_two_regions() {
        for g in both() {
            let tasks = build_subtasks(&g);
            let mut total = 0;
            for &s in g.states() {
                let (a, b) = active_subtasks(&g, &tasks, s).unwrap();
                assert_ne!(a, b);
                total += 2;
            }
            assert_eq!(total, 208);
        }
    }

    #[test]
    fn target_hallway_outside_own_region() {
        let g = build_grid(Variant::Rooms);
        for t in build_subtasks(&g) {
            assert!(!t.contains(&g, t.target_hallway));
            for &c in t.region() {
                assert_eq!(t.interest(&g, c), 1.0);
            }
        }
    }

    #[test]
    fn hallway_belongs_to_adjacent_rooms_other_hallway_tasks() {
        let g = build_grid(Variant::Rooms);
        let tasks = build_subtasks(&g);
        for &hw in g.hallways() {
            let (a, b) = active_subtasks(&g, &tasks, hw).unwrap();
            let rooms = g.hallway_rooms(hw);
            for id in [a, b] {
                let t = &tasks[id];
                assert!(rooms.contains(&t.room));
                assert_ne!(t.target_hallway, hw);
            }
            assert_ne!(tasks[a].room, tasks[b].room);
        }
    }

    #[test]
    fn policy_rows_and_support() {
        for g in both() {
            for t in build_subtasks(&g) {
                for &c in t.region() {
                    let p = t.target_policy(&g, c);
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    let here = t.dist(&g, c).unwrap();
                    let best = Action::ALL
                        .iter()
                        .filter_map(|&a| t.dist(&g, g.step_dynamics(c, a).unwrap()))
                        .min()
                        .unwrap();
                    assert_eq!(best + 1, here);
                    for a in Action::ALL {
                        let nd = t.dist(&g, g.step_dynamics(c, a).unwrap());
                        assert_eq!(p[a.index()] > 0.0, nd == Some(best), "{c} {a}");
                    }
                }
            }
        }
    }

    #[test]
    fn rooms_ratios_take_three_values() {
        let g = build_grid(Variant::Rooms);
        for t in build_subtasks(&g) {
            for &c in t.region() {
                let i = g.state_index(c).unwrap();
                for a in Action::ALL {
                    let r = t.rho_index(i, a);
                    assert!(r == 0.0 || r == 2.0 || r == 4.0, "{r}");
                }
            }
        }
    }

    #[test]
    fn straight_and_diagonal_policies() {
        let g = build_grid(Variant::Rooms);
        let tasks = build_subtasks(&g);
        let t = subtask_targeting(&tasks, 3, Cell::new(8, 4));
        assert_eq!(t.target_policy(&g, Cell::new(8, 9))[Action::Down.index()], 1.0);
        let p = t.target_policy(&g, Cell::new(6, 10));
        assert_eq!(p[Action::Right.index()], 0.5);
        assert_eq!(p[Action::Down.index()], 0.5);
    }

    #[test]
    fn signal_examples() {
        let g = build_grid(Variant::Rooms);
        let tasks = build_subtasks(&g);
        let t = subtask_targeting(&tasks, 3, Cell::new(8, 4));
        let s = subtask_signals(&g, t, Cell::new(8, 6), Action::Down, Cell::new(8, 5)).unwrap();
        assert_eq!(s, Signals { rho: 4.0, gamma_next: GAMMA, reward: 0.0, active: true });
        let s = subtask_signals(&g, t, Cell::new(8, 5), Action::Down, Cell::new(8, 4)).unwrap();
        assert_eq!(s, Signals { rho: 4.0, gamma_next: 0.0, reward: 1.0, active: true });
        // leaving through the other hallway into the neighbouring room
        let other = Cell::new(5, 8);
        assert!(t.contains(&g, other));
        let s = subtask_signals(&g, t, other, Action::Left, Cell::new(4, 8)).unwrap();
        assert_eq!((s.gamma_next, s.reward, s.active), (0.0, 0.0, true));
        // not active outside the region
        let s = subtask_signals(&g, t, Cell::new(0, 0), Action::Up, Cell::new(0, 1)).unwrap();
        assert!(!s.active);

        let hv = build_grid(Variant::HighVarianceRooms);
        let tasks = build_subtasks(&hv);
        let t = subtask_targeting(&tasks, 3, Cell::new(8, 4));
        let s = subtask_signals(&hv, t, Cell::new(8, 8), Action::Down, Cell::new(8, 7)).unwrap();
        assert!((s.rho - 100.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_zero_exactly_on_exit() {
        for g in both() {
            for t in build_subtasks(&g) {
                for &c in t.region() {
                    for a in Action::ALL {
                        let n = g.step_dynamics(c, a).unwrap();
                        let s = subtask_signals(&g, &t, c, a, n).unwrap();
                        assert!(s.gamma_next == 0.0 || s.gamma_next == GAMMA);
                        let exits = n == t.target_hallway || !t.contains(&g, n);
                        assert_eq!(s.gamma_next == 0.0, exits);
                        assert_eq!(s.reward == 1.0, n == t.target_hallway);
                    }
                }
            }
        }
    }

    #[test]
    fn ratio_products_along_top_right_path() {
        let start = Cell::new(6, 10);
        let g = build_grid(Variant::Rooms);
        let tasks = build_subtasks(&g);
        let t = subtask_targeting(&tasks, 3, Cell::new(8, 4));
        assert_eq!(ratio_product(&g, t, start, &TOP_RIGHT_PATH).unwrap(), 16384.0);

        let hv = build_grid(Variant::HighVarianceRooms);
        let tasks = build_subtasks(&hv);
        let t = subtask_targeting(&tasks, 3, Cell::new(8, 4));
        let p = ratio_product(&hv, t, start, &TOP_RIGHT_PATH).unwrap();
        assert!((p - 409600.0).abs() < 1e-6, "{p}");
    }

    #[test]
    fn ratio_product_rejects_paths_past_termination() {
        let g = build_grid(Variant::Rooms);
        let tasks = build_subtasks(&g);
        let t = subtask_targeting(&tasks, 3, Cell::new(8, 4));
        let mut path = TOP_RIGHT_PATH.to_vec();
        path.push(Action::Down);
        assert!(matches!(
            ratio_product(&g, t, Cell::new(6, 10), &path),
            Err(Error::PathLeftRegion { step: 8 })
        ));
    }

    #[test]
    fn interior_cell_activates_its_room() {
        let g = build_grid(Variant::Rooms);
        let tasks = build_subtasks(&g);
        let (a, b) = active_subtasks(&g, &tasks, Cell::new(2, 2)).unwrap();
        assert_eq!((tasks[a].room, tasks[b].room), (0, 0));
    }
}
