use serde::{Deserialize, Serialize};

use super::ParamVector;

/// Rescale `g` so its Euclidean norm is at most `max_norm`.
pub fn clip_grad_norm(g: &ParamVector, max_norm: f64) -> ParamVector {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = g.norm();
    if norm <= max_norm {
        g.clone()
    } else {
        g.scaled(max_norm / norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adamw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn sgd() -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            step_count: 0,
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 0.0,
            weight_decay: 0.0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// AdamW with betas (0.9, 0.999), epsilon 1e-8 and weight decay 1e-2.
    pub fn adamw(len: usize) -> Self {
        Self {
            kind: OptimizerKind::Adamw,
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-2,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
        }
    }

    pub fn for_kind(kind: OptimizerKind, len: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Self::sgd(),
            OptimizerKind::Adamw => Self::adamw(len),
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }
}

/// One optimizer update; returns the new parameters and state.
pub fn optimizer_step(
    state: &OptimizerState,
    params: &ParamVector,
    g: &ParamVector,
    lr: f64,
) -> (ParamVector, OptimizerState) {
    assert_eq!(params.len(), g.len(), "gradient length");
    let mut next = state.clone();
    next.step_count += 1;
    match state.kind {
        OptimizerKind::Sgd => {
            let mut p = params.clone();
            p.axpy(-lr, g);
            (p, next)
        }
        OptimizerKind::Adamw => {
            assert_eq!(state.first_moment.len(), params.len(), "moment length");
            let t = next.step_count as i32;
            let bc1 = 1.0 - state.beta1.powi(t);
            let bc2 = 1.0 - state.beta2.powi(t);
            let mut p = params.clone();
            for i in 0..p.len() {
                let m = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g[i];
                let v = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g[i] * g[i];
                next.first_moment[i] = m;
                next.second_moment[i] = v;
                p[i] *= 1.0 - lr * state.weight_decay;
                p[i] -= lr * (m / bc1) / ((v / bc2).sqrt() + state.epsilon);
            }
            (p, next)
        }
    }
}
