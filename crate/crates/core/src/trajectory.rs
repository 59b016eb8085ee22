//! Behavior-policy trajectories, regenerated on demand from a seed.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Action, Cell, GridSpec};

/// Start cell for learning runs: the bottom-left corner.
pub const DEFAULT_START: Cell = Cell::new(0, 0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub s: Cell,
    pub a: Action,
    pub s_next: Cell,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub seed: u64,
    pub start: Cell,
    pub steps: Vec<Step>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `run_index`. Depends only on the base seed and the run, so every
/// algorithm instance sees the same trajectory for a given run.
pub fn run_seed(base_seed: u64, run_index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(run_index.wrapping_add(0x5EED)))
}

/// Samples an action index from `probs` with a uniform draw `u` in [0, 1).
fn sample(probs: &[f64; 4], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding can leave acc slightly below 1
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(3)
}

/// Generates `steps` behavior transitions from `start`.
pub fn generate_run(grid: &GridSpec, seed: u64, steps: usize, start: Cell) -> Result<Trajectory> {
    let mut out = Vec::with_capacity(steps);
    let mut idx = grid.state_index(start).ok_or(Error::NotOpen(start))?;
    for_each_index_step(grid, seed, steps, idx, |s, a, n| {
        out.push(Step {
            s: grid.states()[s],
            a: Action::from_index(a as usize).unwrap(),
            s_next: grid.states()[n],
        });
        idx = n;
    });
    Ok(Trajectory { seed, start, steps: out })
}

/// Compact transition stream by state index: `(s, a, s_next)`.
pub fn generate_indices(grid: &GridSpec, seed: u64, steps: usize, start: Cell) -> Result<Vec<[u8; 3]>> {
    let idx = grid.state_index(start).ok_or(Error::NotOpen(start))?;
    let mut out = Vec::with_capacity(steps);
    for_each_index_step(grid, seed, steps, idx, |s, a, n| out.push([s as u8, a, n as u8]));
    Ok(out)
}

fn for_each_index_step(
    grid: &GridSpec,
    seed: u64,
    steps: usize,
    mut s: usize,
    mut f: impl FnMut(usize, u8, usize),
) {
    assert!(grid.num_states() <= 256, "compact streams need at most 256 states");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..steps {
        let a = sample(&grid.behavior_probs(s), rng.gen::<f64>());
        let cell = grid.states()[s];
        let next = grid.step_dynamics(cell, Action::ALL[a]).expect("states are open");
        let n = grid.state_index(next).unwrap();
        f(s, a as u8, n);
        s = n;
    }
}

impl Trajectory {
    /// Binary dump: 8-byte little-endian seed, then one `(x, y, action)` byte triple per step.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&self.seed.to_le_bytes())?;
        for st in &self.steps {
            w.write_all(&[st.s.x, st.s.y, st.a.index() as u8])?;
        }
        Ok(())
    }

    pub fn read_from(grid: &GridSpec, mut r: impl Read) -> Result<Trajectory> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
        if buf.len() < 8 || (buf.len() - 8) % 3 != 0 {
            return Err(Error::Format(format!("trajectory dump has bad length {}", buf.len())));
        }
        let seed = u64::from_le_bytes(buf[..8].try_into().unwrap());
        let mut steps = Vec::with_capacity((buf.len() - 8) / 3);
        for (i, rec) in buf[8..].chunks_exact(3).enumerate() {
            let s = Cell::new(rec[0], rec[1]);
            let a = Action::from_index(rec[2] as usize)
                .ok_or_else(|| Error::Format(format!("bad action byte {} at step {i}", rec[2])))?;
            if let Some(prev) = steps.last().map(|p: &Step| p.s_next) {
                if prev != s {
                    return Err(Error::Format(format!("step {i} does not follow the dynamics")));
                }
            }
            let s_next = grid.step_dynamics(s, a)?;
            steps.push(Step { s, a, s_next });
        }
        let start = steps.first().map_or(crate::trajectory::DEFAULT_START, |s| s.s);
        Ok(Trajectory { seed, start, steps })
    }
}
