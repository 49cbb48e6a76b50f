//! Adam with bias correction.

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One in-place Adam update of `params` against `grad`.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, rate: f64) {
    assert_eq!(
        params.len(),
        grad.len(),
        "parameter/gradient length mismatch"
    );
    assert_eq!(
        params.len(),
        state.m.len(),
        "parameter/moment length mismatch"
    );
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= rate * m_hat / (v_hat.sqrt() + state.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.5, -2.0];
        let mut st = AdamState::new(2);
        st.m = vec![0.0, 0.0];
        st.v = vec![4.0, 1.0];
        adam_step(&mut p, &[0.0, 0.0], &mut st, 0.1);
        assert_eq!(p, vec![0.5, -2.0]);
        assert!((st.v[0] - 4.0 * 0.999).abs() < 1e-15);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn minimises_quadratic() {
        let mut theta = [1.0];
        let mut st = AdamState::new(1);
        let mut reached = None;
        for it in 0..200 {
            let g = [2.0 * theta[0]];
            adam_step(&mut theta, &g, &mut st, 0.1);
            if theta[0].abs() < 1e-3 && reached.is_none() {
                reached = Some(it);
            }
        }
        assert!(reached.is_some(), "theta = {}", theta[0]);
    }

    #[test]
    fn first_step_sign_follows_gradient() {
        let mut a = [0.0];
        let mut b = [0.0];
        adam_step(&mut a, &[3.0], &mut AdamState::new(1), 0.01);
        adam_step(&mut b, &[-3.0], &mut AdamState::new(1), 0.01);
        assert!(a[0] < 0.0 && b[0] > 0.0);
        assert!((a[0] + b[0]).abs() < 1e-15);
    }
}
