use super::{AlgorithmParams, Algorithm, LearnerState, NuSchedule, StepInputs};
use crate::grid::Action;
use crate::learners::abtd_nu;
use crate::subtask::GAMMA;
use crate::task::Task;

/// What one behavior step did to a bank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepReport {
    /// The two sub-tasks active at the departure state, which were updated.
    pub updated: [usize; 2],
    /// Whether each updated sub-task terminated (and had its traces reset).
    pub terminated: [bool; 2],
}

/// One algorithm instance learning all sub-tasks of a task in parallel.
#[derive(Clone, Debug)]
pub struct LearnerBank {
    pub params: AlgorithmParams,
    states: Vec<LearnerState>,
    /// ABTD's `nu` per (sub-task, state index), empty for other methods.
    nu: Vec<Vec<[f64; 4]>>,
}

impl LearnerBank {
    pub fn new(params: AlgorithmParams, task: &Task) -> LearnerBank {
        LearnerBank::with_schedule(params, task, abtd_nu)
    }

    pub fn with_schedule(params: AlgorithmParams, task: &Task, schedule: NuSchedule) -> LearnerBank {
        let nu = if params.alg == Algorithm::Abtd {
            task.subtasks
                .iter()
                .map(|t| {
                    (0..task.grid.num_states())
                        .map(|i| {
                            let (pi, b) = (t.policy_index(i), task.grid.behavior_probs(i));
                            std::array::from_fn(|a| schedule(params.lambda, &pi, &b, a))
                        })
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        LearnerBank {
            params,
            states: vec![LearnerState::new(task.dim()); task.subtasks.len()],
            nu,
        }
    }

    pub fn states(&self) -> &[LearnerState] {
        &self.states
    }

    pub fn state(&self, subtask: usize) -> &LearnerState {
        &self.states[subtask]
    }

    pub fn weights(&self, subtask: usize) -> &[f64] {
        &self.states[subtask].w
    }

    pub fn diverged(&self) -> bool {
        self.states.iter().any(|s| s.diverged)
    }

    /// Trace reset for every sub-task, used at run boundaries.
    pub fn reset_traces(&mut self) {
        self.states.iter_mut().for_each(LearnerState::reset_traces);
    }

    /// Learns from the behavior transition `(s, a, s_next)` given by state index.
    ///
    /// Only the two sub-tasks active at `s` are updated. A sub-task whose transition
    /// terminates (`gamma_next = 0`: target reached or region left) gets its terminal
    /// update and then has its traces cleared; weights persist.
    pub fn step(&mut self, task: &Task, s: usize, a: Action, s_next: usize) -> StepReport {
        let ids = task.active[s];
        let mut terminated = [false; 2];
        let b = task.grid.behavior_probs(s)[a.index()];
        for (k, &j) in ids.iter().enumerate() {
            let sub = &task.subtasks[j];
            let sig = sub.signals_index(s, a, s_next);
            debug_assert!(sig.active);
            let inp = StepInputs {
                x: task.features.get(s),
                x_next: task.features.get(s_next),
                reward: sig.reward,
                gamma: GAMMA,
                gamma_next: sig.gamma_next,
                rho: sig.rho,
                pi: sub.policy_index(s)[a.index()],
                b,
                interest: 1.0,
                nu: self.nu.get(j).map_or(0.0, |t| t[s][a.index()]),
            };
            let st = &mut self.states[j];
            st.step(&self.params, &inp);
            if sig.gamma_next == 0.0 {
                st.reset_traces();
                terminated[k] = true;
            }
        }
        StepReport { updated: ids, terminated }
    }
}
