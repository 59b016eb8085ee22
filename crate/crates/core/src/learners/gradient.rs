//! Gradient-TD family: GTD, GTD2, HTD, Proximal GTD2 and TDRC.

use super::{add_sparse, axpy, dense_dot, dot, td_error, trace_update, AlgorithmParams, LearnerState, StepInputs};

/// Shared start of every rule here: `delta` at the current weights and the rho-trace.
fn delta_and_trace(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = td_error(&st.w, inp);
    trace_update(&mut st.z, inp.rho * inp.gamma * p.lambda, inp.x, inp.rho);
    delta
}

/// `v += step * (delta z - (vᵀx) x)` with `vᵀx` taken before the update.
fn aux_update(v: &mut [f64], z: &[f64], x: &[usize], delta: f64, v_x: f64, step: f64) {
    axpy(v, z, step * delta);
    add_sparse(v, x, -step * v_x);
}

pub(super) fn step_gtd(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = delta_and_trace(st, p, inp);
    let (v_x, v_z) = (dot(&st.v, inp.x), dense_dot(&st.v, &st.z));
    axpy(&mut st.w, &st.z, p.alpha * delta);
    add_sparse(&mut st.w, inp.x_next, -p.alpha * inp.gamma_next * (1.0 - p.lambda) * v_z);
    aux_update(&mut st.v, &st.z, inp.x, delta, v_x, p.alpha_v());
    delta
}

pub(super) fn step_tdrc(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = delta_and_trace(st, p, inp);
    let (v_x, v_z) = (dot(&st.v, inp.x), dense_dot(&st.v, &st.z));
    axpy(&mut st.w, &st.z, p.alpha * delta);
    add_sparse(&mut st.w, inp.x_next, -p.alpha * inp.gamma_next * (1.0 - p.lambda) * v_z);
    let shrink = 1.0 - p.alpha * p.tdrc_regularization;
    if shrink != 1.0 {
        st.v.iter_mut().for_each(|e| *e *= shrink);
    }
    aux_update(&mut st.v, &st.z, inp.x, delta, v_x, p.alpha);
    delta
}

pub(super) fn step_gtd2(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = delta_and_trace(st, p, inp);
    let (v_x, v_z) = (dot(&st.v, inp.x), dense_dot(&st.v, &st.z));
    add_sparse(&mut st.w, inp.x, p.alpha * v_x);
    add_sparse(&mut st.w, inp.x_next, -p.alpha * inp.gamma_next * (1.0 - p.lambda) * v_z);
    aux_update(&mut st.v, &st.z, inp.x, delta, v_x, p.alpha_v());
    delta
}

pub(super) fn step_htd(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = td_error(&st.w, inp);
    let decay = inp.gamma * p.lambda;
    trace_update(&mut st.z, inp.rho * decay, inp.x, inp.rho);
    trace_update(&mut st.z_b, decay, inp.x, 1.0);

    let v_zb = dense_dot(&st.v, &st.z_b);
    let v_diff: f64 = st.v.iter().zip(st.z.iter().zip(&st.z_b)).map(|(v, (z, zb))| v * (z - zb)).sum();

    // w += alpha [delta z + (x - gamma' x') (z - z_b)ᵀv]
    axpy(&mut st.w, &st.z, p.alpha * delta);
    add_sparse(&mut st.w, inp.x, p.alpha * v_diff);
    add_sparse(&mut st.w, inp.x_next, -p.alpha * inp.gamma_next * v_diff);

    // v += alpha_v [delta z - (x - gamma' x') (vᵀz_b)]
    let av = p.alpha_v();
    axpy(&mut st.v, &st.z, av * delta);
    add_sparse(&mut st.v, inp.x, -av * v_zb);
    add_sparse(&mut st.v, inp.x_next, av * inp.gamma_next * v_zb);
    delta
}

/// Extragradient form: a half step from `(w, v)`, then the full step from `(w, v)` using
/// quantities evaluated at the half-step point.
pub(super) fn step_proximal_gtd2(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = delta_and_trace(st, p, inp);
    let av = p.alpha_v();
    let cut = p.alpha * inp.gamma_next * (1.0 - p.lambda);
    let (v_x, v_z) = (dot(&st.v, inp.x), dense_dot(&st.v, &st.z));

    let mut v_half = st.v.clone();
    aux_update(&mut v_half, &st.z, inp.x, delta, v_x, av);
    let mut w_half = st.w.clone();
    add_sparse(&mut w_half, inp.x, p.alpha * v_x);
    add_sparse(&mut w_half, inp.x_next, -cut * v_z);

    let delta_half = td_error(&w_half, inp);
    let (vh_x, vh_z) = (dot(&v_half, inp.x), dense_dot(&v_half, &st.z));

    // v_{t+1} = v_t + alpha_v [delta_half z - (v_halfᵀx) x]
    axpy(&mut st.v, &st.z, av * delta_half);
    add_sparse(&mut st.v, inp.x, -av * vh_x);
    add_sparse(&mut st.w, inp.x, p.alpha * vh_x);
    add_sparse(&mut st.w, inp.x_next, -cut * vh_z);
    delta
}

#[cfg(test)]
mod tests {
    use super::super::testing::Stream;
    use super::super::{Algorithm, AlgorithmParams, LearnerState};

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|e| e.to_bits()).collect()
    }

    #[test]
    fn tdrc_without_regularizer_is_gtd_at_eta_one() {
        let stream = Stream::random(21, 10, 1000, 4.0, false);
        for lambda in [0.0, 0.5, 0.9] {
            let mut tdrc = LearnerState::new(10);
            let mut gtd = LearnerState::new(10);
            let mut p_tdrc = AlgorithmParams::new(Algorithm::Tdrc, 0.01, lambda);
            p_tdrc.tdrc_regularization = 0.0;
            let p_gtd = AlgorithmParams::new(Algorithm::Gtd, 0.01, lambda).with_eta(1.0);
            for k in 0..stream.data.len() {
                let inp = stream.inputs(k);
                tdrc.step(&p_tdrc, &inp);
                gtd.step(&p_gtd, &inp);
                assert_eq!(bits(&tdrc.w), bits(&gtd.w), "step {k}");
                assert_eq!(bits(&tdrc.v), bits(&gtd.v), "step {k}");
            }
        }
    }

    #[test]
    fn regularizer_changes_tdrc() {
        let stream = Stream::random(22, 10, 200, 4.0, false);
        let mut a = LearnerState::new(10);
        let mut b = LearnerState::new(10);
        let p = AlgorithmParams::new(Algorithm::Tdrc, 0.05, 0.5);
        let mut p0 = p;
        p0.tdrc_regularization = 0.0;
        for k in 0..stream.data.len() {
            a.step(&p, &stream.inputs(k));
            b.step(&p0, &stream.inputs(k));
        }
        assert_ne!(a.w, b.w);
    }

    #[test]
    fn htd_on_policy_is_td() {
        let stream = Stream::random(23, 10, 1000, 1.0, true);
        for lambda in [0.0, 0.3, 0.9, 1.0] {
            let mut htd = LearnerState::new(10);
            let mut td = LearnerState::new(10);
            let p_htd = AlgorithmParams::new(Algorithm::Htd, 0.01, lambda).with_eta(0.5);
            let p_td = AlgorithmParams::new(Algorithm::OffPolicyTd, 0.01, lambda);
            for k in 0..stream.data.len() {
                let inp = stream.inputs(k);
                htd.step(&p_htd, &inp);
                td.step(&p_td, &inp);
                assert_eq!(htd.z, htd.z_b);
                for (a, b) in htd.w.iter().zip(&td.w) {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "step {k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn gtd2_hand_step() {
        // v starts at zero, so the first GTD2 step only moves v.
        let stream = Stream::random(24, 6, 1, 4.0, false);
        let mut st = LearnerState::new(6);
        let p = AlgorithmParams::new(Algorithm::Gtd2, 0.1, 0.0).with_eta(2.0);
        let mut inp = stream.inputs(0);
        inp.reward = 1.0;
        st.step(&p, &inp);
        assert!(st.w.iter().all(|&w| w == 0.0));
        for &i in inp.x {
            assert!((st.v[i] - 0.05 * inp.rho).abs() < 1e-15);
        }
    }

    #[test]
    fn proximal_half_step_uses_fresh_delta() {
        let stream = Stream::random(25, 6, 300, 2.0, false);
        let mut prox = LearnerState::new(6);
        let mut plain = LearnerState::new(6);
        let pp = AlgorithmParams::new(Algorithm::ProximalGtd2, 0.05, 0.3).with_eta(1.0);
        let pg = AlgorithmParams::new(Algorithm::Gtd2, 0.05, 0.3).with_eta(1.0);
        for k in 0..stream.data.len() {
            prox.step(&pp, &stream.inputs(k));
            plain.step(&pg, &stream.inputs(k));
        }
        assert!(prox.w.iter().all(|w| w.is_finite()));
        assert_ne!(prox.w, plain.w);
    }
}
