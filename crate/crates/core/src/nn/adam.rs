//! Adam optimizer with bias correction.

use crate::nn::network::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub cfg: AdamConfig,
}

impl AdamState {
    pub fn new(param_count: usize, cfg: AdamConfig) -> Self {
        Self { m: vec![0.0; param_count], v: vec![0.0; param_count], step: 0, cfg }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over a flat view of the parameters.
    pub fn update_flat(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let c = self.cfg;
        let m_corr = 1.0 - c.beta1.powi(t);
        let v_corr = 1.0 - c.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / m_corr;
            let v_hat = self.v[i] / v_corr;
            params[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
    }
}

/// Apply one Adam step to every parameter of the network.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState) {
    let mut flat_params = Vec::with_capacity(state.m.len());
    for p in &net.params {
        for s in p.slices() {
            flat_params.extend_from_slice(s);
        }
    }
    let mut flat_grads = Vec::with_capacity(state.m.len());
    for g in &grads.layers {
        for s in g.slices() {
            flat_grads.extend_from_slice(s);
        }
    }
    state.update_flat(&mut flat_params, &flat_grads);
    let mut cursor = 0usize;
    for p in net.params.iter_mut() {
        for s in p.slices_mut() {
            s.copy_from_slice(&flat_params[cursor..cursor + s.len()]);
            cursor += s.len();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_weights_unchanged() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut st = AdamState::new(3, AdamConfig::default());
        st.update_flat(&mut p, &[0.0, 0.0, 0.0]);
        st.update_flat(&mut p, &[0.0, 0.0, 0.0]);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_matches_hand_recurrence() {
        let cfg = AdamConfig::default();
        let g = 0.37;
        let mut p = vec![2.0];
        let mut st = AdamState::new(1, cfg);
        st.update_flat(&mut p, &[g]);
        // hand expansion of the recurrence at t = 1
        let m = (1.0 - cfg.beta1) * g;
        let v = (1.0 - cfg.beta2) * g * g;
        let m_hat = m / (1.0 - cfg.beta1);
        let v_hat = v / (1.0 - cfg.beta2);
        let expect = 2.0 - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        assert!((p[0] - expect).abs() < 1e-15);
        // first-step magnitude is ~lr regardless of |g|
        assert!(((2.0 - p[0]).abs() - cfg.lr).abs() < 1e-6);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        // Oracle: iterate the recurrence directly and compare the step size.
        let cfg = AdamConfig::default();
        let g = -3.0;
        let mut p = vec![0.0];
        let mut st = AdamState::new(1, cfg);
        let mut last = p[0];
        let mut step_size = 0.0;
        for _ in 0..5000 {
            st.update_flat(&mut p, &[g]);
            step_size = (p[0] - last).abs();
            last = p[0];
        }
        assert!((step_size - cfg.lr).abs() < 1e-5, "step {step_size}");
        // moving against the gradient
        assert!(p[0] > 0.0);
    }
}
