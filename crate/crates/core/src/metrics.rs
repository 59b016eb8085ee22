//! Value-error metrics, run aggregation and best-instance selection.

use crate::learners::{AlgorithmParams, LearnerBank};
use crate::oracle::Oracles;
use crate::task::Task;

/// Root of the `mu * i` weighted mean squared value error of one sub-task, summed
/// cell by cell.
pub fn rve(task: &Task, subtask: usize, w: &[f64], oracles: &Oracles) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..task.grid.num_states() {
        if let Some(v) = oracles.values.get(subtask, i) {
            let weight = oracles.mu.mu[i];
            let est: f64 = task.features.get(i).iter().map(|&k| w[k]).sum();
            num += weight * (est - v) * (est - v);
            den += weight;
        }
    }
    (num / den).sqrt()
}

pub fn ave(rves: &[f64]) -> f64 {
    rves.iter().sum::<f64>() / rves.len() as f64
}

/// Error of every sub-task from scratch.
pub fn full_ave(task: &Task, weights: &[&[f64]], oracles: &Oracles) -> f64 {
    let r: Vec<f64> = weights.iter().enumerate().map(|(j, w)| rve(task, j, w, oracles)).collect();
    ave(&r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSnapshot {
    pub step: usize,
    pub per_subtask_rve: Vec<f64>,
    pub ave: f64,
}

/// Cells that share a feature pattern share an estimate, so each sub-task's error is
/// evaluated once per pattern.
#[derive(Clone, Debug)]
struct PatternGroup {
    features: Vec<usize>,
    /// `(mu * i / sum(mu * i), v_pi)` of each cell with this pattern.
    cells: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct ErrorModel {
    groups: Vec<Vec<PatternGroup>>,
}

impl ErrorModel {
    pub fn new(task: &Task, oracles: &Oracles) -> ErrorModel {
        let groups = (0..task.subtasks.len())
            .map(|j| {
                let cells: Vec<usize> =
                    (0..task.grid.num_states()).filter(|&i| oracles.values.get(j, i).is_some()).collect();
                let total: f64 = cells.iter().map(|&i| oracles.mu.mu[i]).sum();
                let mut out: Vec<PatternGroup> = Vec::new();
                for i in cells {
                    let f = task.features.get(i);
                    let entry = (oracles.mu.mu[i] / total, oracles.values.get(j, i).unwrap());
                    match out.iter_mut().find(|g| g.features == f) {
                        Some(g) => g.cells.push(entry),
                        None => out.push(PatternGroup { features: f.to_vec(), cells: vec![entry] }),
                    }
                }
                out
            })
            .collect();
        ErrorModel { groups }
    }

    pub fn num_subtasks(&self) -> usize {
        self.groups.len()
    }

    pub fn rve(&self, subtask: usize, w: &[f64]) -> f64 {
        let mut sum = 0.0;
        for g in &self.groups[subtask] {
            let est: f64 = g.features.iter().map(|&k| w[k]).sum();
            for &(weight, v) in &g.cells {
                sum += weight * (est - v) * (est - v);
            }
        }
        sum.sqrt()
    }

    /// Error of all-zero weights, where every learning curve starts.
    pub fn initial_ave(&self, dim: usize) -> f64 {
        let zero = vec![0.0; dim];
        ave(&(0..self.num_subtasks()).map(|j| self.rve(j, &zero)).collect::<Vec<_>>())
    }
}

/// Last error per sub-task, refreshed only where weights changed.
#[derive(Clone, Debug)]
pub struct AveCache {
    rves: Vec<f64>,
    /// Total number of sub-task evaluations, for checking the refresh budget.
    pub evaluations: usize,
}

impl AveCache {
    pub fn new(model: &ErrorModel, bank: &LearnerBank) -> AveCache {
        let rves = (0..model.num_subtasks()).map(|j| model.rve(j, bank.weights(j))).collect();
        AveCache { rves, evaluations: model.num_subtasks() }
    }

    /// Re-evaluates `changed` sub-tasks and returns the new aggregate.
    pub fn update(&mut self, model: &ErrorModel, changed: &[usize], bank: &LearnerBank) -> f64 {
        for &j in changed {
            self.rves[j] = if bank.state(j).diverged { f64::INFINITY } else { model.rve(j, bank.weights(j)) };
            self.evaluations += 1;
        }
        self.ave()
    }

    pub fn ave(&self) -> f64 {
        ave(&self.rves)
    }

    pub fn snapshot(&self, step: usize) -> ErrorSnapshot {
        ErrorSnapshot { step, per_subtask_rve: self.rves.clone(), ave: self.ave() }
    }
}

/// Sample mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSummary {
    pub params: AlgorithmParams,
    /// Mean error over steps of each run; `+inf` for diverged runs.
    pub per_run_mean_ave: Vec<f64>,
    /// Over non-diverged runs.
    pub mean: f64,
    pub stderr: f64,
    pub diverged_runs: usize,
}

impl InstanceSummary {
    /// Ranking key: diverging anywhere disqualifies an instance.
    pub fn score(&self) -> f64 {
        if self.diverged_runs > 0 {
            f64::INFINITY
        } else {
            self.mean
        }
    }

    pub fn runs(&self) -> usize {
        self.per_run_mean_ave.len()
    }
}

pub fn summarize_instance(params: AlgorithmParams, per_run_mean_ave: Vec<f64>) -> InstanceSummary {
    let finite: Vec<f64> = per_run_mean_ave.iter().copied().filter(|v| v.is_finite()).collect();
    let diverged_runs = per_run_mean_ave.len() - finite.len();
    let (mean, stderr) =
        if finite.is_empty() { (f64::INFINITY, f64::INFINITY) } else { mean_stderr(&finite) };
    InstanceSummary { params, per_run_mean_ave, mean, stderr, diverged_runs }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    MeanError,
    /// Area under the learning curve over `steps` steps.
    Auc { steps: usize },
}

pub fn best_instance(summaries: &[InstanceSummary], criterion: Criterion) -> Option<usize> {
    let key = |s: &InstanceSummary| match criterion {
        Criterion::MeanError => s.score(),
        Criterion::Auc { steps } => s.score() * steps as f64,
    };
    (0..summaries.len()).min_by(|&a, &b| key(&summaries[a]).total_cmp(&key(&summaries[b])))
}

/// Per-step mean and standard error across runs of equally thinned curves.
pub fn curve_summary(curves: &[&[f64]]) -> Vec<(f64, f64)> {
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..len)
        .map(|k| {
            let col: Vec<f64> = curves.iter().map(|c| c[k]).collect();
            mean_stderr(&col)
        })
        .collect()
}
