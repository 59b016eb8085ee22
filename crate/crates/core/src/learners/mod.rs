//! Linear off-policy prediction learners.
//!
//! Every algorithm shares [`LearnerState`] and advances through [`LearnerState::step`].
//! Features are binary and given as lists of active indices, so `wᵀx` is a sum over
//! the active entries.

mod backup;
mod bank;
mod checkpoint;
mod emphatic;
mod gradient;
mod td;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use backup::{abtd_nu, NuSchedule};
pub use bank::{LearnerBank, StepReport};
pub use checkpoint::CHECKPOINT_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    OffPolicyTd,
    Gtd,
    Gtd2,
    Htd,
    ProximalGtd2,
    Tdrc,
    EmphaticTd,
    EmphaticTdBeta,
    TreeBackup,
    Vtrace,
    Abtd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Algorithm::OffPolicyTd,
        Algorithm::Gtd,
        Algorithm::Gtd2,
        Algorithm::Htd,
        Algorithm::ProximalGtd2,
        Algorithm::Tdrc,
        Algorithm::EmphaticTd,
        Algorithm::EmphaticTdBeta,
        Algorithm::TreeBackup,
        Algorithm::Vtrace,
        Algorithm::Abtd,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Algorithm::OffPolicyTd => "td",
            Algorithm::Gtd => "gtd",
            Algorithm::Gtd2 => "gtd2",
            Algorithm::Htd => "htd",
            Algorithm::ProximalGtd2 => "pgtd2",
            Algorithm::Tdrc => "tdrc",
            Algorithm::EmphaticTd => "etd",
            Algorithm::EmphaticTdBeta => "etdb",
            Algorithm::TreeBackup => "tb",
            Algorithm::Vtrace => "vtrace",
            Algorithm::Abtd => "abtd",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::OffPolicyTd => "Off-policy TD(lambda)",
            Algorithm::Gtd => "GTD(lambda)",
            Algorithm::Gtd2 => "GTD2(lambda)",
            Algorithm::Htd => "HTD(lambda)",
            Algorithm::ProximalGtd2 => "Proximal GTD2(lambda)",
            Algorithm::Tdrc => "TDRC(lambda)",
            Algorithm::EmphaticTd => "Emphatic TD(lambda)",
            Algorithm::EmphaticTdBeta => "Emphatic TD(lambda, beta)",
            Algorithm::TreeBackup => "Tree Backup(lambda)",
            Algorithm::Vtrace => "Vtrace(lambda)",
            Algorithm::Abtd => "ABTD(zeta)",
        }
    }

    /// Gradient-TD methods with a tuned second step size (`alpha_v = alpha / eta`).
    pub fn uses_eta(self) -> bool {
        matches!(self, Algorithm::Gtd | Algorithm::Gtd2 | Algorithm::Htd | Algorithm::ProximalGtd2)
    }

    pub fn uses_beta(self) -> bool {
        self == Algorithm::EmphaticTdBeta
    }

    /// Methods with an auxiliary weight vector.
    pub fn has_aux(self) -> bool {
        self.uses_eta() || self == Algorithm::Tdrc
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.slug() == s)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

/// How Vtrace clips the importance sampling ratio in its trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VtraceClip {
    /// `min(rho, 1)`.
    #[default]
    Min,
    /// `max(rho, 1)`, kept for comparison experiments.
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub alg: Algorithm,
    pub alpha: f64,
    /// `lambda`, or `zeta` for ABTD.
    pub lambda: f64,
    /// Ratio of the two step sizes; only read by [`Algorithm::uses_eta`] methods.
    pub eta: f64,
    /// Follow-on decay; only read by Emphatic TD(lambda, beta).
    pub beta: f64,
    #[serde(default)]
    pub vtrace_clip: VtraceClip,
    /// Coefficient of TDRC's `-alpha v` term. 1 is TDRC; 0 removes the regularizer.
    #[serde(default = "one")]
    pub tdrc_regularization: f64,
}

fn one() -> f64 {
    1.0
}

impl AlgorithmParams {
    pub fn new(alg: Algorithm, alpha: f64, lambda: f64) -> Self {
        AlgorithmParams {
            alg,
            alpha,
            lambda,
            eta: 1.0,
            beta: 0.0,
            vtrace_clip: VtraceClip::Min,
            tdrc_regularization: 1.0,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Second step size. TDRC ties it to `alpha`.
    pub fn alpha_v(&self) -> f64 {
        if self.alg == Algorithm::Tdrc {
            self.alpha
        } else {
            self.alpha / self.eta
        }
    }
}

/// One step of data for one sub-task.
#[derive(Clone, Copy, Debug)]
pub struct StepInputs<'a> {
    pub x: &'a [usize],
    pub x_next: &'a [usize],
    pub reward: f64,
    /// Termination value at the current state.
    pub gamma: f64,
    pub gamma_next: f64,
    pub rho: f64,
    /// Target probability of the action taken.
    pub pi: f64,
    /// Behavior probability of the action taken.
    pub b: f64,
    pub interest: f64,
    /// ABTD's `nu` for the current state-action; ignored by other methods.
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerState {
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    /// Behavior trace (HTD).
    pub z_b: Vec<f64>,
    /// Auxiliary weights (Gradient-TD).
    pub v: Vec<f64>,
    /// Follow-on trace (Emphatic TD).
    pub follow_on: f64,
    pub prev_rho: f64,
    /// Trace coefficient carried from the previous step: `pi` (Tree Backup) or `nu * pi` (ABTD).
    pub prev_pi: f64,
    pub diverged: bool,
}

impl LearnerState {
    pub fn new(d: usize) -> LearnerState {
        assert!(d >= 1);
        LearnerState {
            w: vec![0.0; d],
            z: vec![0.0; d],
            z_b: vec![0.0; d],
            v: vec![0.0; d],
            follow_on: 0.0,
            prev_rho: 1.0,
            prev_pi: 0.0,
            diverged: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn predict(&self, x: &[usize]) -> f64 {
        dot(&self.w, x)
    }

    /// Clears everything that carries information between steps of one activation.
    /// Weights persist.
    pub fn reset_traces(&mut self) {
        self.z.fill(0.0);
        self.z_b.fill(0.0);
        self.follow_on = 0.0;
        self.prev_rho = 1.0;
        self.prev_pi = 0.0;
    }

    /// Applies one update. A diverged learner is frozen and ignores further input.
    pub fn step(&mut self, params: &AlgorithmParams, inp: &StepInputs<'_>) {
        if self.diverged {
            return;
        }
        let delta = match params.alg {
            Algorithm::OffPolicyTd => td::step_offpolicy_td(self, params, inp),
            Algorithm::Gtd => gradient::step_gtd(self, params, inp),
            Algorithm::Gtd2 => gradient::step_gtd2(self, params, inp),
            Algorithm::Htd => gradient::step_htd(self, params, inp),
            Algorithm::ProximalGtd2 => gradient::step_proximal_gtd2(self, params, inp),
            Algorithm::Tdrc => gradient::step_tdrc(self, params, inp),
            Algorithm::EmphaticTd => emphatic::step_emphatic(self, params, inp, None),
            Algorithm::EmphaticTdBeta => emphatic::step_emphatic(self, params, inp, Some(params.beta)),
            Algorithm::TreeBackup => backup::step_treebackup(self, params, inp),
            Algorithm::Vtrace => backup::step_vtrace(self, params, inp),
            Algorithm::Abtd => backup::step_abtd(self, params, inp),
        };
        if !delta.is_finite() || !self.follow_on.is_finite() || !all_finite(&self.w) || !all_finite(&self.v) {
            self.diverged = true;
        }
    }
}

#[inline]
pub(crate) fn dot(w: &[f64], x: &[usize]) -> f64 {
    x.iter().map(|&i| w[i]).sum()
}

#[inline]
pub(crate) fn dense_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// `y += scale * x` for binary `x`.
#[inline]
pub(crate) fn add_sparse(y: &mut [f64], x: &[usize], scale: f64) {
    for &i in x {
        y[i] += scale;
    }
}

/// `y += scale * x` for dense `x`.
#[inline]
pub(crate) fn axpy(y: &mut [f64], x: &[f64], scale: f64) {
    for (p, q) in y.iter_mut().zip(x) {
        *p += scale * q;
    }
}

/// `z <- decay * z + scale * x`.
#[inline]
pub(crate) fn trace_update(z: &mut [f64], decay: f64, x: &[usize], scale: f64) {
    if decay == 0.0 {
        z.fill(0.0);
    } else {
        z.iter_mut().for_each(|e| *e *= decay);
    }
    add_sparse(z, x, scale);
}

#[inline]
pub(crate) fn td_error(w: &[f64], inp: &StepInputs<'_>) -> f64 {
    inp.reward + inp.gamma_next * dot(w, inp.x_next) - dot(w, inp.x)
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|e| e.is_finite())
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A random input stream over `d` tabular-ish binary features.
    pub struct Stream {
        pub xs: Vec<Vec<usize>>,
        pub data: Vec<(usize, usize, f64, f64, f64, f64, f64)>,
    }

    impl Stream {
        /// `(s, s_next, reward, gamma, gamma_next, rho, pi)` over random states; `rho_max`
        /// bounds the ratios.
        pub fn random(seed: u64, d: usize, n: usize, rho_max: f64, on_policy: bool) -> Stream {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let states = 12;
            let xs = (0..states)
                .map(|_| {
                    let mut idx: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.3)).collect();
                    if idx.is_empty() {
                        idx.push(rng.gen_range(0..d));
                    }
                    idx
                })
                .collect();
            let mut data = Vec::new();
            let mut s = 0;
            for _ in 0..n {
                let next = rng.gen_range(0..states);
                let reward = if rng.gen_bool(0.2) { 1.0 } else { 0.0 };
                let gamma_next = if rng.gen_bool(0.1) { 0.0 } else { 0.9 };
                let rho = if on_policy { 1.0 } else { rng.gen_range(0.0..rho_max) };
                let pi = rng.gen_range(0.0..1.0);
                data.push((s, next, reward, 0.9, gamma_next, rho, pi));
                s = next;
            }
            Stream { xs, data }
        }

        pub fn inputs(&self, k: usize) -> StepInputs<'_> {
            let (s, n, reward, gamma, gamma_next, rho, pi) = self.data[k];
            StepInputs {
                x: &self.xs[s],
                x_next: &self.xs[n],
                reward,
                gamma,
                gamma_next,
                rho,
                pi,
                b: if rho > 0.0 { pi / rho } else { 0.25 },
                interest: 1.0,
                nu: 0.5,
            }
        }
    }

    pub fn one_hot(i: usize) -> Vec<usize> {
        vec![i]
    }
}
