use super::{broadcast, ServerState, ServerStrategy};
use crate::nn::ParamVector;

/// Client-side change to the local outer objective.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LocalModifier {
    #[default]
    Identity,
    /// Adds `(mu / 2) ||w - anchor||²`.
    Proximal { mu: f64, anchor: ParamVector },
    /// Adds `c_global - c_local` to every outer gradient.
    Scaffold { c_global: ParamVector, c_local: ParamVector },
}

impl LocalModifier {
    /// Additive loss term at `w`.
    pub fn penalty(&self, w: &ParamVector) -> f64 {
        match self {
            Self::Proximal { mu, anchor } => 0.5 * mu * w.sub(anchor).norm_sq(),
            Self::Identity | Self::Scaffold { .. } => 0.0,
        }
    }

    /// Add the modifier's gradient contribution at `w` to `g`.
    pub fn correct_gradient(&self, w: &ParamVector, g: &mut ParamVector) {
        match self {
            Self::Identity => {}
            Self::Proximal { mu, anchor } => {
                if *mu != 0.0 {
                    g.axpy(*mu, &w.sub(anchor));
                }
            }
            Self::Scaffold { c_global, c_local } => {
                g.axpy(1.0, c_global);
                g.axpy(-1.0, c_local);
            }
        }
    }
}

/// The modifier a client applies this round, given the server state and the
/// client's own control variate (Scaffold only).
pub fn local_loss_modifier(server: &ServerState, c_local: Option<&ParamVector>) -> LocalModifier {
    match server.strategy {
        ServerStrategy::Fedavg | ServerStrategy::Fednova | ServerStrategy::Fedexp => LocalModifier::Identity,
        ServerStrategy::Fedprox if server.hyper.mu == 0.0 => LocalModifier::Identity,
        ServerStrategy::Fedprox => LocalModifier::Proximal {
            mu: server.hyper.mu,
            anchor: server.theta.clone(),
        },
        ServerStrategy::Fedacg if server.hyper.beta_acg == 0.0 => LocalModifier::Identity,
        ServerStrategy::Fedacg => LocalModifier::Proximal {
            mu: server.hyper.beta_acg,
            anchor: broadcast(server),
        },
        ServerStrategy::Scaffold => LocalModifier::Scaffold {
            c_global: server.c_global.clone(),
            c_local: c_local.cloned().unwrap_or_else(|| ParamVector::zeros(server.theta.len())),
        },
    }
}

/// Option-II control variate refresh after `steps` local steps of size `lr`:
/// returns `(c_local_new, c_local_new - c_local)`.
pub fn scaffold_control_update(
    c_local: &ParamVector,
    c_global: &ParamVector,
    theta: &ParamVector,
    w_e: &ParamVector,
    steps: usize,
    lr: f64,
) -> (ParamVector, ParamVector) {
    let denom = steps as f64 * lr;
    let mut next = c_local.sub(c_global);
    if denom > 0.0 {
        next.axpy(1.0 / denom, &theta.sub(w_e));
    }
    let delta = next.sub(c_local);
    (next, delta)
}
