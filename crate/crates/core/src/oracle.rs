//! Ground truth: exact target-policy values and the behavior stationary distribution.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Action, GridSpec};
use crate::subtask::{SubTask, GAMMA};
use crate::trajectory::generate_indices;

/// Agreement required between the closed-form and linear-solve values.
pub const VALUE_TOLERANCE: f64 = 1e-10;

/// `v_pi` per sub-task and state index; `None` outside the sub-task's region.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub values: Vec<Vec<Option<f64>>>,
}

impl ValueTable {
    pub fn get(&self, subtask: usize, state: usize) -> Option<f64> {
        self.values[subtask][state]
    }

    pub fn to_csv(&self, grid: &GridSpec) -> String {
        let mut out = String::from("subtask,cell_x,cell_y,value\n");
        for (j, row) in self.values.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    let c = grid.states()[i];
                    writeln!(out, "{j},{},{},{v}", c.x, c.y).unwrap();
                }
            }
        }
        out
    }
}

/// Every shortest path has the same length and pays +1 only on arrival, so
/// `v(s) = gamma^(dist(s) - 1)`.
pub fn closed_form_values(grid: &GridSpec, subtasks: &[SubTask]) -> ValueTable {
    let values = subtasks
        .iter()
        .map(|t| {
            (0..grid.num_states())
                .map(|i| {
                    t.contains_index(i)
                        .then(|| GAMMA.powi(t.dist_index(i).expect("region has distances") as i32 - 1))
                })
                .collect()
        })
        .collect();
    ValueTable { values }
}

/// Solves `v = sum_a pi(a|s) [r + gamma' v(s')]` on each region exactly.
pub fn solved_values(grid: &GridSpec, subtasks: &[SubTask]) -> ValueTable {
    let values = subtasks
        .iter()
        .map(|t| {
            let cells: Vec<usize> = (0..grid.num_states()).filter(|&i| t.contains_index(i)).collect();
            let pos = |i: usize| cells.iter().position(|&c| c == i);
            let n = cells.len();
            let mut a = DMatrix::<f64>::identity(n, n);
            let mut r = DVector::<f64>::zeros(n);
            for (row, &i) in cells.iter().enumerate() {
                let s = grid.states()[i];
                let pi = t.policy_index(i);
                for act in Action::ALL {
                    let p = pi[act.index()];
                    if p == 0.0 {
                        continue;
                    }
                    let next = grid.state_index(grid.step_dynamics(s, act).unwrap()).unwrap();
                    let sig = t.signals_index(i, act, next);
                    r[row] += p * sig.reward;
                    if sig.gamma_next > 0.0 {
                        let col = pos(next).expect("continuing inside the region");
                        a[(row, col)] -= p * sig.gamma_next;
                    }
                }
            }
            let sol = a.lu().solve(&r).expect("discounted system is non-singular");
            let mut out = vec![None; grid.num_states()];
            for (row, &i) in cells.iter().enumerate() {
                out[i] = Some(sol[row]);
            }
            out
        })
        .collect();
    ValueTable { values }
}

/// True values by both routes, checked against each other.
pub fn true_values(grid: &GridSpec, subtasks: &[SubTask]) -> Result<ValueTable> {
    let closed = closed_form_values(grid, subtasks);
    let solved = solved_values(grid, subtasks);
    for (j, (a, b)) in closed.values.iter().zip(&solved.values).enumerate() {
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            if let (Some(x), Some(y)) = (x, y) {
                if (x - y).abs() > VALUE_TOLERANCE {
                    return Err(Error::ValueMismatch {
                        subtask: j,
                        cell: grid.states()[i],
                        closed: *x,
                        solved: *y,
                    });
                }
            }
        }
    }
    Ok(closed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryDistribution {
    /// Probability per state index.
    pub mu: Vec<f64>,
}

impl StationaryDistribution {
    pub fn to_csv(&self, grid: &GridSpec) -> String {
        let mut out = String::from("cell_x,cell_y,value\n");
        for (i, p) in self.mu.iter().enumerate() {
            let c = grid.states()[i];
            writeln!(out, "{},{},{p}", c.x, c.y).unwrap();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StationaryMode {
    /// Power iteration until `||mu P - mu||_1 < 1e-12`.
    Exact,
    /// Visit fractions of one behavior rollout from the bottom-left corner.
    Rollout { steps: usize, seed: u64 },
}

const POWER_TOLERANCE: f64 = 1e-12;
const POWER_MAX_ITERATIONS: usize = 1_000_000;

/// Applies the behavior transition operator: returns `mu P`.
pub fn behavior_step(grid: &GridSpec, mu: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mu.len()];
    for (i, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let s = grid.states()[i];
        let b = grid.behavior_probs(i);
        for a in Action::ALL {
            let n = grid.state_index(grid.step_dynamics(s, a).unwrap()).unwrap();
            out[n] += m * b[a.index()];
        }
    }
    out
}

pub fn stationary_distribution(grid: &GridSpec, mode: StationaryMode) -> Result<StationaryDistribution> {
    let n = grid.num_states();
    match mode {
        StationaryMode::Exact => {
            let mut mu = vec![1.0 / n as f64; n];
            let mut residual = f64::INFINITY;
            for _ in 0..POWER_MAX_ITERATIONS {
                let next = behavior_step(grid, &mu);
                residual = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
                let total: f64 = next.iter().sum();
                mu = next.into_iter().map(|p| p / total).collect();
                if residual < POWER_TOLERANCE {
                    return Ok(StationaryDistribution { mu });
                }
            }
            Err(Error::NoConvergence { iterations: POWER_MAX_ITERATIONS, residual })
        }
        StationaryMode::Rollout { steps, seed } => {
            let mut counts = vec![0u64; n];
            for [s, _, _] in generate_indices(grid, seed, steps, crate::trajectory::DEFAULT_START)? {
                counts[s as usize] += 1;
            }
            let mu = counts.iter().map(|&c| c as f64 / steps.max(1) as f64).collect();
            Ok(StationaryDistribution { mu })
        }
    }
}

/// Oracle bundle used by the error metrics.
#[derive(Clone, Debug)]
pub struct Oracles {
    pub values: ValueTable,
    pub mu: StationaryDistribution,
}

impl Oracles {
    pub fn compute(grid: &GridSpec, subtasks: &[SubTask]) -> Result<Oracles> {
        Ok(Oracles {
            values: true_values(grid, subtasks)?,
            mu: stationary_distribution(grid, StationaryMode::Exact)?,
        })
    }
}

/// Target-policy probabilities of every sub-task over its region.
pub fn target_policy_csv(grid: &GridSpec, subtasks: &[SubTask]) -> String {
    let mut out = String::from("subtask,room,target_x,target_y,cell_x,cell_y,state,left,right,up,down\n");
    for t in subtasks {
        for (i, c) in grid.states().iter().enumerate() {
            if !t.contains_index(i) {
                continue;
            }
            let [l, r, u, d] = t.policy_index(i);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{l},{r},{u},{d}",
                t.id,
                t.room,
                t.target_hallway.x,
                t.target_hallway.y,
                c.x,
                c.y,
                grid.state_number(*c)
            )
            .unwrap();
        }
    }
    out
}

/// File name and contents of each oracle table.
pub fn oracle_files(grid: &GridSpec, subtasks: &[SubTask], oracles: &Oracles) -> [(&'static str, String); 3] {
    [
        ("values.csv", oracles.values.to_csv(grid)),
        ("mu.csv", oracles.mu.to_csv(grid)),
        ("policy.csv", target_policy_csv(grid, subtasks)),
    ]
}
