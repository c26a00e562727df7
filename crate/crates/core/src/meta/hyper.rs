use serde::{Deserialize, Serialize};

use crate::nn::OptimizerKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaStrategy {
    Maml,
    Fomaml,
    Reptile,
    MetaNsgd,
    Fedmenf,
}

impl std::str::FromStr for MetaStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maml" => Ok(Self::Maml),
            "fomaml" => Ok(Self::Fomaml),
            "reptile" => Ok(Self::Reptile),
            "meta_nsgd" => Ok(Self::MetaNsgd),
            "fedmenf" => Ok(Self::Fedmenf),
            other => Err(Error::arg("strategy", format!("unknown meta strategy `{other}`"))),
        }
    }
}

/// How the privacy-preserving outer step picks its regularization coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Fixed(f64),
    /// Privacy budget `zeta` bounding the cumulative query-loss change.
    Adaptive(f64),
}

/// Which meta-gradient the privacy-preserving step regularizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetaGradMode {
    #[default]
    Exact,
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsgdParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Per-task clipping bound on the first-order meta-gradient.
    pub clip: f64,
    pub noise_seed: u64,
}

impl Default for NsgdParams {
    fn default() -> Self {
        Self {
            epsilon: 10.0,
            delta: 1e-5,
            clip: 0.1,
            noise_seed: 0,
        }
    }
}

impl NsgdParams {
    /// Gaussian-mechanism noise scale `clip * sqrt(2 ln(1.25/delta)) / epsilon`.
    pub fn sigma(&self) -> f64 {
        self.clip * (2.0 * (1.25 / self.delta).ln()).sqrt() / self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaHyperparams {
    /// Inner steps `K`.
    pub inner_steps: usize,
    /// Outer steps `E`.
    pub outer_steps: usize,
    pub lambda_i: f64,
    pub lambda_o: f64,
    /// Interpolation rate for Reptile.
    pub reptile_rate: f64,
    pub inner_batch: usize,
    pub outer_batch: usize,
    pub clip_norm: f64,
    pub strategy: MetaStrategy,
    pub gamma_mode: GammaMode,
    pub meta_grad_mode: MetaGradMode,
    pub nsgd: NsgdParams,
    pub outer_optimizer: OptimizerKind,
}

impl Default for MetaHyperparams {
    fn default() -> Self {
        Self {
            inner_steps: 2,
            outer_steps: 8,
            lambda_i: 0.01,
            lambda_o: 0.01,
            reptile_rate: 0.5,
            inner_batch: 256,
            outer_batch: 256,
            clip_norm: 5.0,
            strategy: MetaStrategy::Maml,
            gamma_mode: GammaMode::Fixed(0.0),
            meta_grad_mode: MetaGradMode::Exact,
            nsgd: NsgdParams::default(),
            outer_optimizer: OptimizerKind::Sgd,
        }
    }
}

impl MetaHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.outer_steps == 0 {
            return Err(Error::arg("outer_steps", "must be at least 1"));
        }
        if !(self.lambda_i > 0.0) {
            return Err(Error::arg("lambda_i", format!("must be positive, got {}", self.lambda_i)));
        }
        if !(self.lambda_o >= 0.0) {
            return Err(Error::arg("lambda_o", format!("must be non-negative, got {}", self.lambda_o)));
        }
        if !(self.reptile_rate >= 0.0) {
            return Err(Error::arg("reptile_rate", "must be non-negative"));
        }
        if self.inner_batch == 0 || self.outer_batch == 0 {
            return Err(Error::arg("batch", "batch sizes must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::arg("clip_norm", "must be positive"));
        }
        match self.gamma_mode {
            GammaMode::Fixed(g) if !(0.0..=1.0).contains(&g) => {
                return Err(Error::arg("gamma", format!("{g} outside [0, 1]")));
            }
            GammaMode::Adaptive(z) if !(z > 0.0) => {
                return Err(Error::arg("zeta", format!("must be positive, got {z}")));
            }
            _ => {}
        }
        if self.strategy == MetaStrategy::MetaNsgd
            && !(self.nsgd.epsilon > 0.0 && self.nsgd.clip > 0.0 && self.nsgd.delta > 0.0 && self.nsgd.delta < 1.0)
        {
            return Err(Error::arg("nsgd", "epsilon and clip must be positive, delta in (0, 1)"));
        }
        Ok(())
    }
}
