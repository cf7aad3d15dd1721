use serde::{Deserialize, Serialize};

use crate::error::{Result, VeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(VeError::shape(format!(
            "{} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_approaches_sign() {
        let cfg = AdamConfig::with_lr(0.01);
        for g in [1e-3, 1.0, 1e3] {
            let mut p = vec![0.0, 0.0];
            let mut s = AdamState::new(2);
            adam_step(&mut p, &[g, -g], &mut s, &cfg).unwrap();
            // the bias-corrected first update is lr g / (|g| + eps)
            let expect = 0.01 * g / (g + 1e-8);
            assert!((p[0] + expect).abs() < 1e-15 && (p[1] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = vec![1.5, -2.0];
        let mut s = AdamState::new(2);
        for _ in 0..5 {
            adam_step(&mut p, &[0.0, 0.0], &mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, vec![1.5, -2.0]);
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        let mut x = vec![0.0];
        let mut s = AdamState::new(1);
        let cfg = AdamConfig::with_lr(0.1);
        for _ in 0..500 {
            let g = x[0] - 3.0;
            adam_step(&mut x, &[g], &mut s, &cfg).unwrap();
        }
        assert!((x[0] - 3.0).abs() < 1e-3, "{}", x[0]);
    }

    #[test]
    fn length_mismatch() {
        let mut s = AdamState::new(2);
        assert!(adam_step(&mut [0.0], &[1.0], &mut s, &AdamConfig::default()).is_err());
    }
}
