//! A 5-state on-policy random walk with tabular features, used to check that every
//! learner reaches the least-squares fixed point of a fixed batch.

#![allow(dead_code)]

use ope_bench::learners::{abtd_nu, Algorithm, AlgorithmParams, LearnerState, StepInputs};
use ope_bench::lstd::{LstdAccumulator, Weighting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CHAIN_STATES: usize = 5;
const GAMMA: f64 = 0.9;
/// Left, right and two actions that stay put, all equally likely under both policies.
const PROBS: [f64; 4] = [0.25; 4];

#[derive(Clone, Copy, Debug)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub next: usize,
    pub reward: f64,
    /// 0 when the walk falls off either end.
    pub gamma_next: f64,
}

/// Episodes start in the middle; stepping off the right end pays 1.
pub fn chain_batch(seed: u64, n: usize) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = CHAIN_STATES / 2;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.gen_range(0..4);
        let (next, reward, gamma_next) = match a {
            0 if s == 0 => (CHAIN_STATES / 2, 0.0, 0.0),
            0 => (s - 1, 0.0, GAMMA),
            1 if s == CHAIN_STATES - 1 => (CHAIN_STATES / 2, 1.0, 0.0),
            1 => (s + 1, 0.0, GAMMA),
            _ => (s, 0.0, GAMMA),
        };
        out.push(Transition { s, a, next, reward, gamma_next });
        s = next;
    }
    out
}

const FEATURES: [[usize; 1]; CHAIN_STATES] = [[0], [1], [2], [3], [4]];

fn inputs(t: &Transition, nu: f64) -> StepInputs<'static> {
    StepInputs {
        x: &FEATURES[t.s],
        x_next: &FEATURES[t.next],
        reward: t.reward,
        gamma: GAMMA,
        gamma_next: t.gamma_next,
        rho: 1.0,
        pi: PROBS[t.a],
        b: PROBS[t.a],
        interest: 1.0,
        nu,
    }
}

/// Least-squares solution of the batch for a given trace parameter and weighting.
pub fn batch_lstd(batch: &[Transition], lambda: f64, weighting: Weighting) -> Vec<f64> {
    let mut acc = LstdAccumulator::new(CHAIN_STATES, lambda, weighting);
    for t in batch {
        acc.accumulate(&inputs(t, 0.0));
        if t.gamma_next == 0.0 {
            acc.reset_traces();
        }
    }
    let sol = acc.solve();
    assert!(!sol.singular && sol.residual < 1e-8);
    sol.w
}

/// Trace parameter and weighting of the least-squares problem each method solves on
/// this chain, where `pi = b = 1/4` for every action.
pub fn matching_problem(p: &AlgorithmParams) -> (f64, Weighting) {
    match p.alg {
        Algorithm::TreeBackup => (p.lambda * PROBS[0], Weighting::Standard),
        Algorithm::Abtd => ((2.0 * p.lambda).min(1.0), Weighting::Standard),
        Algorithm::EmphaticTd => (p.lambda, Weighting::Emphatic { beta: None }),
        Algorithm::EmphaticTdBeta => (p.lambda, Weighting::Emphatic { beta: Some(p.beta) }),
        _ => (p.lambda, Weighting::Standard),
    }
}

/// Presents the batch `epochs` times, resetting traces at terminations and between
/// epochs, and returns the learned weights.
pub fn learn_batch(p: &AlgorithmParams, batch: &[Transition], epochs: usize) -> LearnerState {
    let mut st = LearnerState::new(CHAIN_STATES);
    let nu: Vec<f64> = batch.iter().map(|t| abtd_nu(p.lambda, &PROBS, &PROBS, t.a)).collect();
    for _ in 0..epochs {
        for (t, &nu) in batch.iter().zip(&nu) {
            st.step(p, &inputs(t, nu));
            if t.gamma_next == 0.0 {
                st.reset_traces();
            }
        }
        st.reset_traces();
    }
    st
}

pub fn chain_params(alg: Algorithm, lambda: f64) -> AlgorithmParams {
    AlgorithmParams::new(alg, 2e-4, lambda).with_eta(1.0).with_beta(0.5)
}

/// Largest weight gap to the matching least-squares solution, for one method.
pub fn chain_gap(alg: Algorithm, lambda: f64, batch: &[Transition], epochs: usize) -> f64 {
    let p = chain_params(alg, lambda);
    let (l, w) = matching_problem(&p);
    let target = batch_lstd(batch, l, w);
    let st = learn_batch(&p, batch, epochs);
    assert!(!st.diverged);
    st.w.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Random transitions over a handful of sparse binary feature vectors.
pub struct RandomStream {
    pub xs: Vec<Vec<usize>>,
    /// `(s, s_next, reward, gamma_next, rho, pi)`.
    pub data: Vec<(usize, usize, f64, f64, f64, f64)>,
}

impl RandomStream {
    pub fn new(seed: u64, d: usize, n: usize, rho_max: f64) -> RandomStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<usize>> = (0..12)
            .map(|_| {
                let mut idx: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.3)).collect();
                if idx.is_empty() {
                    idx.push(rng.gen_range(0..d));
                }
                idx
            })
            .collect();
        let mut s = 0;
        let data = (0..n)
            .map(|_| {
                let next = rng.gen_range(0..xs.len());
                let reward = if rng.gen_bool(0.2) { 1.0 } else { 0.0 };
                let gamma_next = if rng.gen_bool(0.1) { 0.0 } else { GAMMA };
                let rho = if rho_max == 1.0 && rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.0..rho_max) };
                let pi = rng.gen_range(0.0..1.0);
                let step = (s, next, reward, gamma_next, rho, pi);
                s = next;
                step
            })
            .collect();
        RandomStream { xs, data }
    }

    pub fn inputs(&self, k: usize) -> StepInputs<'_> {
        let (s, n, reward, gamma_next, rho, pi) = self.data[k];
        StepInputs {
            x: &self.xs[s],
            x_next: &self.xs[n],
            reward,
            gamma: GAMMA,
            gamma_next,
            rho,
            pi,
            b: 0.25,
            interest: 1.0,
            nu: 1.0,
        }
    }

    pub fn on_policy(mut self) -> RandomStream {
        self.data.iter_mut().for_each(|t| t.4 = 1.0);
        self
    }
}
