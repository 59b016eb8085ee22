//! Least-squares fixed points used as asymptotic baselines.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::grid::Action;
use crate::learners::StepInputs;
use crate::metrics::{ave, ErrorModel};
use crate::subtask::GAMMA;
use crate::task::Task;
use crate::trajectory::{generate_indices, run_seed, DEFAULT_START};
use crate::Result;

/// Condition estimate above which a system is solved by pseudo-inverse and flagged.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weighting {
    /// `z <- rho gamma (lambda z + x)`.
    Standard,
    /// `F <- beta rho_prev F + I`, `M = lambda I + (1 - lambda) F`,
    /// `z <- rho (gamma lambda z + M x)`. `beta: None` decays `F` by the current `gamma`.
    Emphatic { beta: Option<f64> },
}

#[derive(Clone, Debug)]
pub struct LstdAccumulator {
    pub lambda: f64,
    pub weighting: Weighting,
    /// Running mean of `z (x - gamma' x')ᵀ`.
    pub a: DMatrix<f64>,
    /// Running mean of `R z`.
    pub b: DVector<f64>,
    pub z: Vec<f64>,
    pub follow_on: f64,
    prev_rho: f64,
    /// Number of samples folded in.
    pub t: u64,
    scratch: Vec<f64>,
}

impl LstdAccumulator {
    pub fn new(d: usize, lambda: f64, weighting: Weighting) -> LstdAccumulator {
        LstdAccumulator {
            lambda,
            weighting,
            a: DMatrix::zeros(d, d),
            b: DVector::zeros(d),
            z: vec![0.0; d],
            follow_on: 0.0,
            prev_rho: 1.0,
            t: 0,
            scratch: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn reset_traces(&mut self) {
        self.z.fill(0.0);
        self.follow_on = 0.0;
        self.prev_rho = 1.0;
    }

    pub fn accumulate(&mut self, inp: &StepInputs<'_>) {
        match self.weighting {
            Weighting::Standard => {
                let scale = inp.rho * inp.gamma;
                for e in &mut self.z {
                    *e *= scale * self.lambda;
                }
                for &i in inp.x {
                    self.z[i] += scale;
                }
            }
            Weighting::Emphatic { beta } => {
                let decay = beta.unwrap_or(inp.gamma);
                self.follow_on = decay * self.prev_rho * self.follow_on + inp.interest;
                let m = self.lambda * inp.interest + (1.0 - self.lambda) * self.follow_on;
                for e in &mut self.z {
                    *e *= inp.rho * inp.gamma * self.lambda;
                }
                for &i in inp.x {
                    self.z[i] += inp.rho * m;
                }
                self.prev_rho = inp.rho;
            }
        }

        let step = 1.0 / (self.t + 1) as f64;
        let c = &mut self.scratch;
        c.fill(0.0);
        for &i in inp.x {
            c[i] += 1.0;
        }
        for &i in inp.x_next {
            c[i] -= inp.gamma_next;
        }
        for (col, &cj) in c.iter().enumerate() {
            let column = self.a.column_mut(col);
            for (a, &zi) in column.into_iter().zip(&self.z) {
                *a += (zi * cj - *a) * step;
            }
        }
        for (b, &zi) in self.b.iter_mut().zip(&self.z) {
            *b += (inp.reward * zi - *b) * step;
        }
        self.t += 1;
    }

    /// Count-weighted merge of another accumulator's statistics; traces are untouched.
    pub fn merge(&mut self, other: &LstdAccumulator) {
        let total = self.t + other.t;
        if total == 0 {
            return;
        }
        let (p, q) = (self.t as f64 / total as f64, other.t as f64 / total as f64);
        self.a = &self.a * p + &other.a * q;
        self.b = &self.b * p + &other.b * q;
        self.t = total;
    }

    pub fn solve(&self) -> LstdSolution {
        lstd_solve(&self.a, &self.b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstdSolution {
    pub w: Vec<f64>,
    /// Set when the system was rank deficient or ill-conditioned and the least-norm
    /// solution was returned instead.
    pub singular: bool,
    pub condition: f64,
    /// `||A w - b||_inf`.
    pub residual: f64,
}

pub fn lstd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> LstdSolution {
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let direct = (condition <= CONDITION_LIMIT).then(|| a.clone().lu().solve(b)).flatten();
    let (w, singular) = match direct {
        Some(w) => (w, false),
        None => {
            let eps = smax * a.nrows() as f64 * f64::EPSILON;
            (svd.solve(b, eps).expect("u and v were computed"), true)
        }
    };
    let residual = (a * &w - b).amax();
    LstdSolution { w: w.iter().copied().collect(), singular, condition, residual }
}

/// LSTD over the shared behavior streams: one accumulator per sub-task, traces reset at
/// terminations and run boundaries, statistics pooled across runs.
pub fn lstd_over_runs(
    task: &Task,
    lambda: f64,
    weighting: Weighting,
    runs: usize,
    steps: usize,
    base_seed: u64,
) -> Result<Vec<LstdAccumulator>> {
    let mut accs = vec![LstdAccumulator::new(task.dim(), lambda, weighting); task.subtasks.len()];
    for r in 0..runs {
        let stream = generate_indices(&task.grid, run_seed(base_seed, r as u64), steps, DEFAULT_START)?;
        accumulate_stream(task, &mut accs, &stream);
        accs.iter_mut().for_each(LstdAccumulator::reset_traces);
    }
    Ok(accs)
}

/// Folds one stream of `(s, a, s')` state-index triples into the accumulators.
pub fn accumulate_stream(task: &Task, accs: &mut [LstdAccumulator], stream: &[[u8; 3]]) {
    for &[s, a, n] in stream {
        let (s, n) = (s as usize, n as usize);
        let a = Action::from_index(a as usize).expect("valid action");
        let b = task.grid.behavior_probs(s)[a.index()];
        for &j in &task.active[s] {
            let sub = &task.subtasks[j];
            let sig = sub.signals_index(s, a, n);
            let inp = StepInputs {
                x: task.features.get(s),
                x_next: task.features.get(n),
                reward: sig.reward,
                gamma: GAMMA,
                gamma_next: sig.gamma_next,
                rho: sig.rho,
                pi: sub.policy_index(s)[a.index()],
                b,
                interest: 1.0,
                nu: 0.0,
            };
            accs[j].accumulate(&inp);
            if sig.gamma_next == 0.0 {
                accs[j].reset_traces();
            }
        }
    }
}

/// Error of one least-squares solution set, a dashed line in the learning-curve plots.
#[derive(Clone, Debug, PartialEq)]
pub struct LstdBaseline {
    pub lambda: f64,
    pub weighting: Weighting,
    pub ave: f64,
    pub rve: Vec<f64>,
    /// Sub-tasks whose system needed the pseudo-inverse.
    pub singular: usize,
    pub max_residual: f64,
}

pub fn lstd_baseline(
    task: &Task,
    model: &ErrorModel,
    lambda: f64,
    weighting: Weighting,
    runs: usize,
    steps: usize,
    base_seed: u64,
) -> Result<LstdBaseline> {
    let accs = lstd_over_runs(task, lambda, weighting, runs, steps, base_seed)?;
    let sols: Vec<LstdSolution> = accs.iter().map(LstdAccumulator::solve).collect();
    let rve: Vec<f64> = sols.iter().enumerate().map(|(j, s)| model.rve(j, &s.w)).collect();
    Ok(LstdBaseline {
        lambda,
        weighting,
        ave: ave(&rve),
        rve,
        singular: sols.iter().filter(|s| s.singular).count(),
        max_residual: sols.iter().map(|s| s.residual).fold(0.0, f64::max),
    })
}

pub const LSTD_HEADER: &str = "lambda,weighting,beta,ave,singular,max_residual";

pub fn lstd_csv(rows: &[LstdBaseline]) -> String {
    let mut out = format!("{LSTD_HEADER}\n");
    for r in rows {
        let (name, beta) = match r.weighting {
            Weighting::Standard => ("standard", String::new()),
            Weighting::Emphatic { beta: None } => ("emphatic", String::new()),
            Weighting::Emphatic { beta: Some(b) } => ("emphatic", b.to_string()),
        };
        writeln!(out, "{},{name},{beta},{},{},{}", r.lambda, r.ave, r.singular, r.max_residual).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::testing::Stream;

    fn batch(stream: &Stream, d: usize, lambda: f64, weighting: Weighting) -> (DMatrix<f64>, DVector<f64>) {
        let mut z = DVector::<f64>::zeros(d);
        let (mut f, mut prev_rho) = (0.0, 1.0);
        let mut a = DMatrix::<f64>::zeros(d, d);
        let mut b = DVector::<f64>::zeros(d);
        let dense = |idx: &[usize]| {
            let mut v = DVector::<f64>::zeros(d);
            idx.iter().for_each(|&i| v[i] += 1.0);
            v
        };
        for k in 0..stream.data.len() {
            let inp = stream.inputs(k);
            let x = dense(inp.x);
            z = match weighting {
                Weighting::Standard => (&z * lambda + &x) * (inp.rho * inp.gamma),
                Weighting::Emphatic { beta } => {
                    f = beta.unwrap_or(inp.gamma) * prev_rho * f + inp.interest;
                    prev_rho = inp.rho;
                    let m = lambda * inp.interest + (1.0 - lambda) * f;
                    (&z * (inp.gamma * lambda) + &x * m) * inp.rho
                }
            };
            a += &z * (&x - dense(inp.x_next) * inp.gamma_next).transpose();
            b += &z * inp.reward;
        }
        let n = stream.data.len() as f64;
        (a / n, b / n)
    }

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / b.amax().max(1e-300)
    }

    #[test]
    fn running_mean_matches_batch() {
        for weighting in [Weighting::Standard, Weighting::Emphatic { beta: None }, Weighting::Emphatic { beta: Some(0.4) }] {
            let stream = Stream::random(51, 12, 5000, 3.0, false);
            let mut acc = LstdAccumulator::new(12, 0.7, weighting);
            for k in 0..stream.data.len() {
                acc.accumulate(&stream.inputs(k));
            }
            let (a, b) = batch(&stream, 12, 0.7, weighting);
            assert!(rel(&acc.a, &a) <= 1e-12, "{weighting:?}: {}", rel(&acc.a, &a));
            let bm = DMatrix::from_column_slice(12, 1, acc.b.as_slice());
            let bb = DMatrix::from_column_slice(12, 1, b.as_slice());
            assert!(rel(&bm, &bb) <= 1e-12);
        }
    }

    #[test]
    fn first_sample_is_exact() {
        let stream = Stream::random(52, 5, 1, 2.0, false);
        let inp = stream.inputs(0);
        let mut acc = LstdAccumulator::new(5, 0.5, Weighting::Emphatic { beta: Some(0.3) });
        acc.accumulate(&inp);
        assert_eq!(acc.follow_on, 1.0);
        let (a, _) = batch(&stream, 5, 0.5, Weighting::Emphatic { beta: Some(0.3) });
        assert_eq!(acc.a, a);
    }

    #[test]
    fn merge_is_count_weighted() {
        let stream = Stream::random(53, 6, 400, 2.0, false);
        let mut whole = LstdAccumulator::new(6, 0.0, Weighting::Standard);
        let mut left = LstdAccumulator::new(6, 0.0, Weighting::Standard);
        let mut right = LstdAccumulator::new(6, 0.0, Weighting::Standard);
        for k in 0..400 {
            whole.accumulate(&stream.inputs(k));
            if k < 150 { &mut left } else { &mut right }.accumulate(&stream.inputs(k));
        }
        left.merge(&right);
        assert_eq!(left.t, 400);
        assert!(rel(&left.a, &whole.a) < 1e-12);
    }

    #[test]
    fn two_state_chain_fixed_point() {
        // 0 -> 1 -> 0 ... with reward 1 on leaving state 1, tabular features, gamma 0.9:
        // v0 = 0.9 v1, v1 = 1 + 0.9 v0.
        let (x0, x1) = (vec![0usize], vec![1usize]);
        let mut acc = LstdAccumulator::new(2, 0.0, Weighting::Standard);
        for k in 0..1000 {
            let (x, xn, r) = if k % 2 == 0 { (&x0, &x1, 0.0) } else { (&x1, &x0, 1.0) };
            acc.accumulate(&StepInputs {
                x,
                x_next: xn,
                reward: r,
                gamma: 0.9,
                gamma_next: 0.9,
                rho: 1.0,
                pi: 1.0,
                b: 1.0,
                interest: 1.0,
                nu: 0.0,
            });
        }
        let sol = acc.solve();
        let v1 = 1.0 / (1.0 - 0.81);
        assert!(!sol.singular);
        assert!((sol.w[1] - v1).abs() < 1e-8);
        assert!((sol.w[0] - 0.9 * v1).abs() < 1e-8);
        assert!(sol.residual < 1e-8);
    }

    #[test]
    fn rank_deficient_systems_are_flagged() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_column_slice(&[1.0, 4.0, 0.0]);
        let sol = lstd_solve(&a, &b);
        assert!(sol.singular);
        assert_eq!(sol.w, vec![1.0, 2.0, 0.0]);
        assert!(sol.residual < 1e-12);
    }
}
