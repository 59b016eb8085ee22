use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Variant;
use crate::learners::{Algorithm, AlgorithmParams};

/// Parameter sets swept for every algorithm. `lambdas` doubles as the `zeta` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    /// `alpha = 2^-x`.
    pub alpha_exponents: Vec<i32>,
    pub lambdas: Vec<f64>,
    /// `eta = 2^x`.
    pub eta_exponents: Vec<i32>,
    pub betas: Vec<f64>,
}

impl ParamGrid {
    pub fn full() -> ParamGrid {
        let mut lambdas = vec![0.0, 0.1, 0.2, 0.3, 0.5, 0.9, 1.0];
        lambdas.extend((2..=6).map(|x| 1.0 - 2f64.powi(-x)));
        lambdas.sort_by(f64::total_cmp);
        ParamGrid {
            alpha_exponents: (0..=18).collect(),
            lambdas,
            eta_exponents: (-6..=8).collect(),
            betas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }

    /// The full grid with `alpha` thinned to even exponents 2..=16.
    pub fn desk() -> ParamGrid {
        ParamGrid { alpha_exponents: (2..=16).step_by(2).collect(), ..ParamGrid::full() }
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alpha_exponents.iter().map(|&x| 2f64.powi(-x)).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.eta_exponents.iter().map(|&x| 2f64.powi(x)).collect()
    }

    /// Every parameter setting of one algorithm, ordered by `lambda`, then `eta` or `beta`,
    /// then `alpha`.
    pub fn instances_of(&self, alg: Algorithm) -> Vec<AlgorithmParams> {
        let extra: Vec<(f64, f64)> = if alg.uses_eta() {
            self.etas().into_iter().map(|e| (e, 0.0)).collect()
        } else if alg.uses_beta() {
            self.betas.iter().map(|&b| (1.0, b)).collect()
        } else {
            vec![(1.0, 0.0)]
        };
        let mut out = Vec::new();
        for &lambda in &self.lambdas {
            for &(eta, beta) in &extra {
                for alpha in self.alphas() {
                    out.push(AlgorithmParams::new(alg, alpha, lambda).with_eta(eta).with_beta(beta));
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 10 runs and a thinned step-size grid.
    Desk,
    /// 50 runs over the full grid.
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Profile> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(vec![format!("profile: unknown profile {other:?}")])),
        }
    }
}

pub const DEFAULT_STEPS: usize = 50_000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_CURVE_EVERY: usize = 100;

/// One parameter setting with its position in the plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instance {
    pub id: usize,
    pub params: AlgorithmParams,
}

impl Instance {
    /// Stable directory name derived from the exact parameter values.
    pub fn key(&self) -> String {
        instance_key(&self.params)
    }
}

pub fn instance_key(p: &AlgorithmParams) -> String {
    let canon = format!(
        "{}|{:016x}|{:016x}|{:016x}|{:016x}|{:?}|{:016x}",
        p.alg.slug(),
        p.alpha.to_bits(),
        p.lambda.to_bits(),
        p.eta.to_bits(),
        p.beta.to_bits(),
        p.vtrace_clip,
        p.tdrc_regularization.to_bits()
    );
    let digest = Sha256::digest(canon.as_bytes());
    let mut out = String::with_capacity(16);
    for byte in &digest[..8] {
        write!(out, "{byte:02x}").unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub task: Variant,
    pub algorithms: Vec<Algorithm>,
    pub grid: ParamGrid,
    pub runs: usize,
    pub steps: usize,
    pub base_seed: u64,
    /// Keep a thinned learning curve every this many steps.
    pub curve_every: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub runs: Option<usize>,
    pub steps: Option<usize>,
    pub base_seed: Option<u64>,
    pub grid: Option<ParamGrid>,
    pub curve_every: Option<usize>,
}

impl SweepPlan {
    pub fn instances(&self) -> Vec<Instance> {
        self.algorithms
            .iter()
            .flat_map(|&a| self.grid.instances_of(a))
            .enumerate()
            .map(|(id, params)| Instance { id, params })
            .collect()
    }

    pub fn num_instances(&self) -> usize {
        self.algorithms.iter().map(|&a| self.grid.instances_of(a).len()).sum()
    }
}

pub fn parse_algorithms(names: &[&str]) -> Result<Vec<Algorithm>> {
    names.iter().map(|n| n.parse()).collect()
}

pub fn build_plan(task: Variant, algs: &[Algorithm], profile: Profile, overrides: Overrides) -> SweepPlan {
    let (grid, runs) = match profile {
        Profile::Desk => (ParamGrid::desk(), 10),
        Profile::Paper => (ParamGrid::full(), 50),
    };
    SweepPlan {
        task,
        algorithms: if algs.is_empty() { Algorithm::ALL.to_vec() } else { algs.to_vec() },
        grid: overrides.grid.unwrap_or(grid),
        runs: overrides.runs.unwrap_or(runs),
        steps: overrides.steps.unwrap_or(DEFAULT_STEPS),
        base_seed: overrides.base_seed.unwrap_or(DEFAULT_SEED),
        curve_every: overrides.curve_every,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_matches_the_parameter_table() {
        let g = ParamGrid::full();
        assert_eq!(
            g.lambdas,
            vec![0.0, 0.1, 0.2, 0.3, 0.5, 0.75, 0.875, 0.9, 0.9375, 0.96875, 0.984375, 1.0]
        );
        assert_eq!(g.alphas().len(), 19);
        assert_eq!(g.alphas()[0], 1.0);
        assert_eq!(g.alphas()[18], 2f64.powi(-18));
        assert_eq!(g.etas().len(), 15);
        assert_eq!(g.etas()[0], 1.0 / 64.0);
        assert_eq!(g.etas()[14], 256.0);
        assert_eq!(g.betas, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn instance_counts() {
        let all = build_plan(Variant::Rooms, &[], Profile::Paper, Overrides::default());
        assert_eq!(all.num_instances(), 16416);
        let td = build_plan(Variant::Rooms, &[Algorithm::OffPolicyTd], Profile::Paper, Overrides::default());
        assert_eq!(td.num_instances(), 228);
        let gtd = build_plan(Variant::Rooms, &[Algorithm::Gtd], Profile::Paper, Overrides::default());
        assert_eq!(gtd.num_instances(), 228 * 15);
        let desk = build_plan(Variant::Rooms, &[Algorithm::OffPolicyTd], Profile::Desk, Overrides::default());
        assert_eq!(desk.num_instances(), 12 * 8);
        assert_eq!(desk.runs, 10);
    }

    #[test]
    fn overrides_apply() {
        let o = Overrides { runs: Some(3), steps: Some(7), base_seed: Some(9), ..Default::default() };
        let p = build_plan(Variant::HighVarianceRooms, &[Algorithm::Vtrace], Profile::Paper, o);
        assert_eq!((p.runs, p.steps, p.base_seed), (3, 7, 9));
    }

    #[test]
    fn keys_are_stable_and_distinct() {
        let plan = build_plan(Variant::Rooms, &[], Profile::Desk, Overrides::default());
        let inst = plan.instances();
        let keys: std::collections::HashSet<String> = inst.iter().map(Instance::key).collect();
        assert_eq!(keys.len(), inst.len());
        assert!(inst.iter().enumerate().all(|(k, i)| i.id == k));
        let p = AlgorithmParams::new(Algorithm::OffPolicyTd, 0.25, 0.0);
        assert_eq!(instance_key(&p), instance_key(&p.clone()));
        assert_eq!(instance_key(&p).len(), 16);
    }

    #[test]
    fn unknown_algorithm_is_rejected() {
        assert!(parse_algorithms(&["td", "q-learning"]).is_err());
        assert_eq!(parse_algorithms(&["td", "abtd"]).unwrap(), vec![Algorithm::OffPolicyTd, Algorithm::Abtd]);
    }
}
