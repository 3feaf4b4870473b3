//! SGD and Adam parameter updates over flat parameter groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn plain_sgd() -> Self {
        OptimizerKind::Sgd { momentum: 0.0 }
    }

    pub fn default_adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Flat, file-friendly optimizer settings. `momentum` only applies to
/// `kind = "sgd"`; the beta/epsilon fields only to `kind = "adam"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerAlgo,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerAlgo {
    Sgd,
    Adam,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimizerAlgo::Adam,
            lr,
            momentum: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerAlgo::Sgd,
            lr,
            momentum: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn build_kind(&self) -> OptimizerKind {
        match self.kind {
            OptimizerAlgo::Sgd => OptimizerKind::Sgd { momentum: self.momentum },
            OptimizerAlgo::Adam => OptimizerKind::Adam {
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
        }
    }

    pub fn state_for(&self, param_len: usize) -> OptimizerState {
        OptimizerState::new(self.build_kind(), self.lr, param_len)
    }
}

/// Per-parameter moment accumulators plus a step counter. The state is
/// created for a fixed total parameter count and must be fed the same
/// parameter groups, in the same order, on every step.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    lr: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, param_len: usize) -> Self {
        let needs_m = !matches!(kind, OptimizerKind::Sgd { momentum } if momentum == 0.0);
        let needs_v = matches!(kind, OptimizerKind::Adam { .. });
        Self {
            kind,
            lr,
            step: 0,
            m: if needs_m { vec![0.0; param_len] } else { Vec::new() },
            v: if needs_v { vec![0.0; param_len] } else { Vec::new() },
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }
}

/// Applies one update to the concatenation of `groups`, each a
/// `(parameters, gradients)` pair. Rejects the step (leaving parameters
/// and state untouched) if any gradient is non-finite.
pub fn optimizer_step(
    groups: &mut [(&mut [f64], &[f64])],
    state: &mut OptimizerState,
) -> Result<()> {
    let total: usize = groups.iter().map(|(p, _)| p.len()).sum();
    for (p, g) in groups.iter() {
        if p.len() != g.len() {
            return Err(Error::Shape(format!(
                "parameter group of {} entries got {} gradients",
                p.len(),
                g.len()
            )));
        }
    }
    if !state.m.is_empty() && state.m.len() != total {
        return Err(Error::Shape(format!(
            "optimizer state sized for {} parameters, got {total}",
            state.m.len()
        )));
    }
    if groups.iter().any(|(_, g)| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("gradient".into()));
    }

    state.step += 1;
    let lr = state.lr;
    match state.kind {
        OptimizerKind::Sgd { momentum } => {
            let mut off = 0;
            for (params, grads) in groups.iter_mut() {
                if momentum == 0.0 {
                    for (p, g) in params.iter_mut().zip(grads.iter()) {
                        *p -= lr * g;
                    }
                } else {
                    let buf = &mut state.m[off..off + params.len()];
                    for ((p, g), b) in params.iter_mut().zip(grads.iter()).zip(buf.iter_mut()) {
                        *b = momentum * *b + g;
                        *p -= lr * *b;
                    }
                }
                off += params.len();
            }
        }
        OptimizerKind::Adam { beta1, beta2, epsilon } => {
            let t = state.step as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            let mut off = 0;
            for (params, grads) in groups.iter_mut() {
                let m = &mut state.m[off..off + params.len()];
                let v = &mut state.v[off..off + params.len()];
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
                off += params.len();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_sgd_is_fixed_point() {
        let mut p = vec![1.5, -0.25];
        let g = vec![0.0, 0.0];
        let mut state = OptimizerState::new(OptimizerKind::plain_sgd(), 0.1, 2);
        optimizer_step(&mut [(&mut p, &g)], &mut state).unwrap();
        assert_eq!(p, vec![1.5, -0.25]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn plain_sgd_arithmetic() {
        let mut p = vec![1.0];
        let g = vec![0.5];
        let mut state = OptimizerState::new(OptimizerKind::plain_sgd(), 0.1, 1);
        optimizer_step(&mut [(&mut p, &g)], &mut state).unwrap();
        assert!((p[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn adam_descends_quadratic() {
        // f(p) = p^2, grad 2p, from p = 1
        let mut p = vec![1.0f64];
        let mut state = OptimizerState::new(OptimizerKind::default_adam(), 0.05, 1);
        let mut prev = p[0].abs();
        for _ in 0..10 {
            let g = vec![2.0 * p[0]];
            optimizer_step(&mut [(&mut p, &g)], &mut state).unwrap();
            assert!(p[0].abs() < prev, "|p| should shrink every step");
            prev = p[0].abs();
        }
    }

    #[test]
    fn non_finite_gradient_rejected_without_touching_params() {
        let mut p = vec![1.0, 2.0];
        let g = vec![0.1, f64::NAN];
        let mut state = OptimizerState::new(OptimizerKind::default_adam(), 0.1, 2);
        assert!(optimizer_step(&mut [(&mut p, &g)], &mut state).is_err());
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn multiple_groups_share_one_state() {
        let mut a = vec![1.0];
        let mut b = vec![2.0, 3.0];
        let ga = vec![1.0];
        let gb = vec![1.0, 1.0];
        let mut state = OptimizerState::new(OptimizerKind::Sgd { momentum: 0.9 }, 0.1, 3);
        optimizer_step(&mut [(&mut a, &ga), (&mut b, &gb)], &mut state).unwrap();
        optimizer_step(&mut [(&mut a, &ga), (&mut b, &gb)], &mut state).unwrap();
        // second step velocity = 0.9*1 + 1 = 1.9 -> p = p0 - 0.1 - 0.19
        assert!((a[0] - (1.0 - 0.1 - 0.19)).abs() < 1e-12);
        assert!((b[1] - (3.0 - 0.1 - 0.19)).abs() < 1e-12);
    }
}
