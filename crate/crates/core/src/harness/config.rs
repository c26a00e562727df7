use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SignalKind;
use crate::meta::{GammaMode, MetaGradMode, MetaHyperparams, MetaStrategy, NsgdParams, TtoSettings};
use crate::nn::{Activation, Architecture, OptimizerKind};
use crate::server::{EvalSettings, ServerHyper, ServerStrategy};
use crate::{Error, Result};

fn cfg_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    /// Number of hidden (sine) layers.
    pub hidden_layers: usize,
    pub hidden: usize,
    pub omega0: f64,
    /// Frequency scale of hidden layers after the first.
    pub omega_hidden: f64,
    pub activation: Activation,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self { hidden_layers: 3, hidden: 64, omega0: 30.0, omega_hidden: 1.0, activation: Activation::Sine }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: SignalKind,
    pub dims: Vec<usize>,
    pub channels: usize,
    /// Number of clients `N`.
    pub n_clients: usize,
    /// Training tasks across all clients, split by a Dirichlet draw.
    pub tasks: usize,
    pub dirichlet_alpha: f64,
    pub support_fraction: f64,
    /// Held-out tasks used for evaluation.
    pub test_tasks: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: SignalKind::RandSmooth,
            dims: vec![32, 32],
            channels: 1,
            n_clients: 8,
            tasks: 16,
            dirichlet_alpha: 1.0,
            support_fraction: 0.5,
            test_tasks: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub strategy: ServerStrategy,
    pub rounds: usize,
    /// Clients sampled per round `M`.
    pub participants: usize,
    pub mu: f64,
    pub eps_exp: f64,
    pub lambda_acg: f64,
    pub beta_acg: f64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        let h = ServerHyper::default();
        Self {
            strategy: ServerStrategy::Fedavg,
            rounds: 50,
            participants: 4,
            mu: h.mu,
            eps_exp: h.eps_exp,
            lambda_acg: h.lambda_acg,
            beta_acg: h.beta_acg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaModeName {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    pub strategy: MetaStrategy,
    pub outer_steps: usize,
    pub inner_steps: usize,
    pub lambda_i: f64,
    pub lambda_o: f64,
    pub inner_batch: usize,
    pub outer_batch: usize,
    pub clip_norm: f64,
    pub optimizer: OptimizerKind,
    pub gamma_mode: GammaModeName,
    pub gamma: f64,
    pub zeta: f64,
    pub meta_grad: MetaGradMode,
    pub reptile_rate: f64,
    pub nsgd_epsilon: f64,
    pub nsgd_delta: f64,
    pub nsgd_clip: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        let nsgd = NsgdParams::default();
        Self {
            strategy: MetaStrategy::Fedmenf,
            outer_steps: 8,
            inner_steps: 1,
            lambda_i: 1e-3,
            lambda_o: 1e-2,
            inner_batch: 256,
            outer_batch: 256,
            clip_norm: 5.0,
            optimizer: OptimizerKind::Sgd,
            gamma_mode: GammaModeName::Fixed,
            gamma: 0.0,
            zeta: 0.1,
            meta_grad: MetaGradMode::Exact,
            reptile_rate: 0.5,
            nsgd_epsilon: nsgd.epsilon,
            nsgd_delta: nsgd.delta,
            nsgd_clip: nsgd.clip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Steps at which `tto` records metrics; strictly increasing.
    pub tto_steps: Vec<usize>,
    /// Upper bound on any scheduled TTO step.
    pub max_tto_steps: usize,
    /// TTO steps used for the in-training held-out evaluation.
    pub round_tto_steps: usize,
    /// Held-out evaluation every `cadence` rounds; 0 disables.
    pub cadence: usize,
    /// TTO step size; defaults to `meta.lambda_i` when absent.
    pub tto_lr: Option<f64>,
    pub tto_optimizer: OptimizerKind,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tto_steps: vec![0, 1, 2, 4, 8, 16, 32, 64, 100, 128, 256, 500],
            max_tto_steps: 10_000,
            round_tto_steps: 64,
            cadence: 10,
            tto_lr: None,
            tto_optimizer: OptimizerKind::Sgd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs/default") }
    }
}

/// A complete experiment description. Every field has a desk-scale default,
/// so an empty file is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub arch: ArchConfig,
    pub data: DataConfig,
    pub federation: FederationConfig,
    pub meta: MetaConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let key = e.span().map_or_else(|| "<file>".to_string(), |s| {
                text.get(s).unwrap_or("<file>").trim().to_string()
            });
            cfg_err(&key, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Check cross-field constraints; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if !(2..=3).contains(&d.dims.len()) || d.dims.contains(&0) {
            return Err(cfg_err("data.dims", format!("need 2 or 3 positive sizes, got {:?}", d.dims)));
        }
        if d.channels != 1 && d.channels != 3 {
            return Err(cfg_err("data.channels", format!("must be 1 or 3, got {}", d.channels)));
        }
        if d.n_clients == 0 {
            return Err(cfg_err("data.n_clients", "must be at least 1"));
        }
        if d.tasks < d.n_clients {
            return Err(cfg_err(
                "data.tasks",
                format!("{} tasks cannot give each of {} clients one", d.tasks, d.n_clients),
            ));
        }
        if !(d.dirichlet_alpha > 0.0 && d.dirichlet_alpha.is_finite()) {
            return Err(cfg_err("data.dirichlet_alpha", "must be positive and finite"));
        }
        if !(d.support_fraction > 0.0 && d.support_fraction < 1.0) {
            return Err(cfg_err("data.support_fraction", "must lie in (0, 1)"));
        }
        if self.arch.hidden_layers == 0 || self.arch.hidden == 0 {
            return Err(cfg_err("arch.hidden", "need at least one hidden layer of width >= 1"));
        }
        if !(self.arch.omega0 > 0.0) {
            return Err(cfg_err("arch.omega0", "must be positive"));
        }
        if !(self.arch.omega_hidden > 0.0) {
            return Err(cfg_err("arch.omega_hidden", "must be positive"));
        }
        let f = &self.federation;
        if f.participants == 0 || f.participants > d.n_clients {
            return Err(cfg_err(
                "federation.participants",
                format!("participants M={} must satisfy 1 <= M <= N={}", f.participants, d.n_clients),
            ));
        }
        for (key, v) in [
            ("federation.mu", f.mu),
            ("federation.eps_exp", f.eps_exp),
            ("federation.lambda_acg", f.lambda_acg),
            ("federation.beta_acg", f.beta_acg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(cfg_err(key, format!("must be non-negative, got {v}")));
            }
        }
        let m = &self.meta;
        if !(m.lambda_o > 0.0) {
            return Err(cfg_err("meta.lambda_o", format!("must be positive, got {}", m.lambda_o)));
        }
        if m.gamma_mode == GammaModeName::Fixed && !(0.0..=1.0).contains(&m.gamma) {
            return Err(cfg_err("meta.gamma", format!("{} outside [0, 1]", m.gamma)));
        }
        if m.gamma_mode == GammaModeName::Adaptive && !(m.zeta > 0.0) {
            return Err(cfg_err("meta.zeta", "must be positive"));
        }
        self.meta_hyper()
            .validate()
            .map_err(|e| match e {
                Error::InvalidArgument { name, reason } => cfg_err(&format!("meta.{name}"), reason),
                other => other,
            })?;
        let e = &self.eval;
        if e.tto_steps.is_empty() {
            return Err(cfg_err("eval.tto_steps", "must not be empty"));
        }
        if e.tto_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err("eval.tto_steps", "must be strictly increasing"));
        }
        if e.tto_steps.iter().chain([&e.round_tto_steps]).any(|&s| s > e.max_tto_steps) {
            return Err(cfg_err("eval.max_tto_steps", "a scheduled step exceeds the maximum"));
        }
        if let Some(lr) = e.tto_lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(cfg_err("eval.tto_lr", "must be positive"));
            }
        }
        if e.cadence > 0 && d.test_tasks == 0 {
            return Err(cfg_err("data.test_tasks", "evaluation is enabled but no test tasks are configured"));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Result<Architecture> {
        let mut dims = vec![self.data.dims.len()];
        dims.extend(std::iter::repeat_n(self.arch.hidden, self.arch.hidden_layers));
        dims.push(self.data.channels);
        Architecture::new(dims, self.arch.omega0, self.arch.activation)?.with_omega_hidden(self.arch.omega_hidden)
    }

    pub fn meta_hyper(&self) -> MetaHyperparams {
        let m = &self.meta;
        MetaHyperparams {
            inner_steps: m.inner_steps,
            outer_steps: m.outer_steps,
            lambda_i: m.lambda_i,
            lambda_o: m.lambda_o,
            reptile_rate: m.reptile_rate,
            inner_batch: m.inner_batch,
            outer_batch: m.outer_batch,
            clip_norm: m.clip_norm,
            strategy: m.strategy,
            gamma_mode: match m.gamma_mode {
                GammaModeName::Fixed => GammaMode::Fixed(m.gamma),
                GammaModeName::Adaptive => GammaMode::Adaptive(m.zeta),
            },
            meta_grad_mode: m.meta_grad,
            nsgd: NsgdParams {
                epsilon: m.nsgd_epsilon,
                delta: m.nsgd_delta,
                clip: m.nsgd_clip,
                noise_seed: self.seed,
            },
            outer_optimizer: m.optimizer,
        }
    }

    pub fn server_hyper(&self) -> ServerHyper {
        let f = &self.federation;
        ServerHyper {
            mu: f.mu,
            eps_exp: f.eps_exp,
            lambda_acg: f.lambda_acg,
            beta_acg: f.beta_acg,
            ..ServerHyper::default()
        }
    }

    pub fn tto_settings(&self) -> TtoSettings {
        TtoSettings {
            lr: self.eval.tto_lr.unwrap_or(self.meta.lambda_i),
            optimizer: self.eval.tto_optimizer,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            cadence: self.eval.cadence,
            tto_steps: self.eval.round_tto_steps,
            tto: self.tto_settings(),
        }
    }
}

/// Read and validate a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml_str(&text)
}

/// Write `cfg` so that [`parse_config`] reads it back unchanged.
pub fn write_config(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, cfg.to_toml_string()).map_err(|e| Error::io(path, e))
}
