use super::{axpy, td_error, trace_update, AlgorithmParams, LearnerState, StepInputs};

/// Emphatic TD(lambda); with `beta` set, the follow-on trace decays by `beta` instead of
/// the current termination value.
pub(super) fn step_emphatic(
    st: &mut LearnerState,
    p: &AlgorithmParams,
    inp: &StepInputs<'_>,
    beta: Option<f64>,
) -> f64 {
    let decay = beta.unwrap_or(inp.gamma);
    st.follow_on = st.prev_rho * decay * st.follow_on + inp.interest;
    let emphasis = emphasis(p.lambda, inp.interest, st.follow_on);

    let delta = td_error(&st.w, inp);
    trace_update(&mut st.z, inp.rho * inp.gamma * p.lambda, inp.x, inp.rho * emphasis);
    axpy(&mut st.w, &st.z, p.alpha * delta);
    st.prev_rho = inp.rho;
    delta
}

/// Emphasis `M = lambda I + (1 - lambda) F`.
pub fn emphasis(lambda: f64, interest: f64, follow_on: f64) -> f64 {
    lambda * interest + (1.0 - lambda) * follow_on
}
