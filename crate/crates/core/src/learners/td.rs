use super::{axpy, td_error, trace_update, AlgorithmParams, LearnerState, StepInputs};

pub(super) fn step_offpolicy_td(st: &mut LearnerState, p: &AlgorithmParams, inp: &StepInputs<'_>) -> f64 {
    let delta = td_error(&st.w, inp);
    trace_update(&mut st.z, inp.rho * inp.gamma * p.lambda, inp.x, inp.rho);
    axpy(&mut st.w, &st.z, p.alpha * delta);
    delta
}
