//! Methods that cut traces by target probabilities instead of ratio products:
//! Tree Backup, Vtrace and ABTD.

use super::{axpy, td_error, trace_update, AlgorithmParams, LearnerState, StepInputs, VtraceClip};

/// Computes ABTD's `nu` for `(zeta, pi(.|s), b(.|s), a)`.
pub type NuSchedule = fn(f64, &[f64; 4], &[f64; 4], usize) -> f64;

/// The schedule of Mahmood, Yu and Sutton (2017).
///
/// `psi` grows linearly from 0 at `zeta = 0` to `psi_0 = 1 / max_a max(b, pi)` at
/// `zeta = 0.5`, then to `psi_max = 1 / min_a max(b, pi)` at `zeta = 1`;
/// `nu = min(psi, 1 / max(b(a), pi(a)))`, which keeps `nu * pi <= 1`.
pub fn abtd_nu(zeta: f64, pi: &[f64; 4], b: &[f64; 4], a: usize) -> f64 {
    let larger = |i: usize| b[i].max(pi[i]);
    let hi = (0..4).map(larger).fold(f64::MIN, f64::max);
    let lo = (0..4).map(larger).fold(f64::MAX, f64::min);
    let (psi_0, psi_max) = (1.0 / hi, 1.0 / lo);
    let psi = 2.0 * zeta * psi_0 + (2.0 * zeta - 1.0).max(0.0) * (psi_max - 2.0 * psi_0);
    psi.min(1.0 / larger(a))
}

pub(super) fn step_treebackup(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = td_error(&st.w, inp);
    trace_update(&mut st.z, inp.gamma * p.lambda * st.prev_pi, inp.x, 1.0);
    axpy(&mut st.w, &st.z, p.alpha * inp.rho * delta);
    st.prev_pi = inp.pi;
    delta
}

pub(super) fn step_vtrace(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let c = match p.vtrace_clip {
        VtraceClip::Min => inp.rho.min(1.0),
        VtraceClip::Max => inp.rho.max(1.0),
    };
    let delta = td_error(&st.w, inp);
    trace_update(&mut st.z, c * inp.gamma * p.lambda, inp.x, c);
    axpy(&mut st.w, &st.z, p.alpha * delta);
    delta
}

pub(super) fn step_abtd(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = td_error(&st.w, inp);
    trace_update(&mut st.z, inp.gamma * st.prev_pi, inp.x, 1.0);
    axpy(&mut st.w, &st.z, p.alpha * inp.rho * delta);
    st.prev_pi = inp.nu * inp.pi;
    delta
}

#[cfg(test)]
mod tests {
    use super::super::testing::Stream;
    use super::super::{Algorithm, AlgorithmParams, LearnerState, VtraceClip};
    use super::*;
    use crate::grid::{build_grid, Action, Variant};
    use crate::subtask::build_subtasks;

    fn dense(x: &[usize], d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        for &i in x {
            v[i] += 1.0;
        }
        v
    }

    #[test]
    fn vtrace_matches_td_when_ratios_at_most_one() {
        let stream = Stream::random(41, 10, 1000, 1.0, false);
        for lambda in [0.0, 0.5, 1.0] {
            let pv = AlgorithmParams::new(Algorithm::Vtrace, 0.01, lambda);
            let pt = AlgorithmParams::new(Algorithm::OffPolicyTd, 0.01, lambda);
            let mut v = LearnerState::new(10);
            let mut t = LearnerState::new(10);
            for k in 0..stream.data.len() {
                let inp = stream.inputs(k);
                assert!(inp.rho <= 1.0);
                v.step(&pv, &inp);
                t.step(&pt, &inp);
                assert_eq!(v, t, "step {k}");
            }
        }
    }

    #[test]
    fn vtrace_clips_large_ratios() {
        let stream = Stream::random(42, 6, 1, 1.0, true);
        let mut inp = stream.inputs(0);
        inp.rho = 4.0;
        let mut st = LearnerState::new(6);
        st.step(&AlgorithmParams::new(Algorithm::Vtrace, 0.1, 0.9), &inp);
        assert_eq!(st.z, dense(inp.x, 6));

        let mut st = LearnerState::new(6);
        let mut p = AlgorithmParams::new(Algorithm::Vtrace, 0.1, 0.9);
        p.vtrace_clip = VtraceClip::Max;
        st.step(&p, &inp);
        assert_eq!(st.z, dense(inp.x, 6).iter().map(|e| e * 4.0).collect::<Vec<_>>());

        inp.rho = 0.0;
        let mut st = LearnerState::new(6);
        st.step(&AlgorithmParams::new(Algorithm::Vtrace, 0.1, 0.9), &inp);
        assert!(st.z.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn tree_backup_traces() {
        let stream = Stream::random(43, 6, 3, 4.0, false);
        let p = AlgorithmParams::new(Algorithm::TreeBackup, 0.1, 0.8);
        let mut st = LearnerState::new(6);
        let first = stream.inputs(0);
        st.step(&p, &first);
        assert_eq!(st.z, dense(first.x, 6));

        // pi = 1 everywhere: the trace decays by gamma * lambda, ratios never enter it
        let mut st = LearnerState::new(6);
        let mut expected = vec![0.0; 6];
        for k in 0..3 {
            let mut inp = stream.inputs(k);
            inp.pi = 1.0;
            inp.rho = 4.0;
            inp.reward = 0.0;
            st.step(&p, &inp);
            let decay = if k == 0 { 0.0 } else { 0.9 * 0.8 };
            expected = expected.iter().zip(dense(inp.x, 6)).map(|(e, x)| decay * e + x).collect();
            for (a, b) in st.z.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }

        // pi = 0 on the previous step cuts the trace
        let mut st = LearnerState::new(6);
        let mut inp = stream.inputs(0);
        inp.pi = 0.0;
        st.step(&p, &inp);
        let next = stream.inputs(1);
        st.step(&p, &next);
        assert_eq!(st.z, dense(next.x, 6));
    }

    #[test]
    fn abtd_zeta_zero_is_one_step() {
        let grid = build_grid(Variant::HighVarianceRooms);
        let tasks = build_subtasks(&grid);
        let t = &tasks[3];
        let i = grid.state_index(t.region()[4]).unwrap();
        for a in 0..4 {
            assert_eq!(abtd_nu(0.0, &t.policy_index(i), &grid.behavior_probs(i), a), 0.0);
        }
        let stream = Stream::random(44, 6, 50, 4.0, false);
        let p = AlgorithmParams::new(Algorithm::Abtd, 0.1, 0.0);
        let mut st = LearnerState::new(6);
        for k in 0..50 {
            let mut inp = stream.inputs(k);
            inp.nu = abtd_nu(0.0, &[0.5, 0.5, 0.0, 0.0], &[0.25; 4], 0);
            st.step(&p, &inp);
            assert_eq!(st.z, dense(inp.x, 6));
        }
    }

    #[test]
    fn abtd_previous_pi_zero_cuts_trace() {
        let stream = Stream::random(45, 6, 2, 4.0, false);
        let p = AlgorithmParams::new(Algorithm::Abtd, 0.1, 1.0);
        let mut st = LearnerState::new(6);
        let mut inp = stream.inputs(0);
        inp.pi = 0.0;
        inp.nu = 3.0;
        st.step(&p, &inp);
        let next = stream.inputs(1);
        st.step(&p, &next);
        assert_eq!(st.z, dense(next.x, 6));
    }

    #[test]
    fn nu_pi_bounded_on_both_tasks() {
        let zetas = [0.0, 0.1, 0.2, 0.3, 0.5, 0.75, 0.875, 0.9, 0.9375, 0.96875, 0.984375, 1.0];
        for variant in [Variant::Rooms, Variant::HighVarianceRooms] {
            let grid = build_grid(variant);
            for t in build_subtasks(&grid) {
                for &c in t.region() {
                    let i = grid.state_index(c).unwrap();
                    let (pi, b) = (t.policy_index(i), grid.behavior_probs(i));
                    for a in Action::ALL {
                        let a = a.index();
                        let mut prev = 0.0;
                        for &zeta in &zetas {
                            let nu = abtd_nu(zeta, &pi, &b, a);
                            assert!(nu >= 0.0);
                            assert!(nu * pi[a] <= pi[a] / b[a].max(pi[a]) + 1e-12);
                            assert!(nu * pi[a] <= 1.0 + 1e-12);
                            assert!(nu >= prev - 1e-12, "nu grows with zeta");
                            prev = nu;
                        }
                        // full bootstrapping at zeta = 1 reaches the bound
                        let nu = abtd_nu(1.0, &pi, &b, a);
                        assert!((nu - 1.0 / b[a].max(pi[a])).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
