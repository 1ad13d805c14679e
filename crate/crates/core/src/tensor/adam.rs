use super::params::ParamStore;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-7;

/// Bias-corrected Adam moments for every parameter of one store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self {
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn first_moment(&self, index: usize) -> &[f64] {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &[f64] {
        &self.v[index]
    }
}

/// One Adam update from the accumulated gradients, which are then zeroed.
pub fn adam_step(state: &mut AdamState, store: &mut ParamStore) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);
    for ((p, m), v) in store.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        for (((w, g), mi), vi) in p.value.data_mut().iter_mut().zip(&mut p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * *g;
            *vi = b2 * *vi + (1.0 - b2) * *g * *g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
            *g = 0.0;
        }
    }
}
