use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::nn::ParamVector;
use crate::rng::SimRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerStrategy {
    Fedavg,
    Fedprox,
    Scaffold,
    Fednova,
    Fedexp,
    Fedacg,
}

impl std::str::FromStr for ServerStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Self::Fedavg),
            "fedprox" => Ok(Self::Fedprox),
            "scaffold" => Ok(Self::Scaffold),
            "fednova" => Ok(Self::Fednova),
            "fedexp" => Ok(Self::Fedexp),
            "fedacg" => Ok(Self::Fedacg),
            other => Err(Error::arg("strategy", format!("unknown server strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerHyper {
    /// FedProx proximal weight.
    pub mu: f64,
    /// FedExP denominator epsilon.
    pub eps_exp: f64,
    /// FedACG momentum / lookahead coefficient.
    pub lambda_acg: f64,
    /// FedACG client-side proximal weight.
    pub beta_acg: f64,
    /// Scaffold global step size.
    pub global_lr: f64,
}

impl Default for ServerHyper {
    fn default() -> Self {
        Self {
            mu: 0.1,
            eps_exp: 0.001,
            lambda_acg: 0.2,
            beta_acg: 0.1,
            global_lr: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub theta: ParamVector,
    pub strategy: ServerStrategy,
    pub hyper: ServerHyper,
    pub momentum: ParamVector,
    pub c_global: ParamVector,
    pub n_clients: usize,
    pub round: usize,
}

impl ServerState {
    pub fn new(theta: ParamVector, strategy: ServerStrategy, hyper: ServerHyper, n_clients: usize) -> Self {
        let len = theta.len();
        Self {
            theta,
            strategy,
            hyper,
            momentum: ParamVector::zeros(len),
            c_global: ParamVector::zeros(len),
            n_clients,
            round: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub w_e: ParamVector,
    /// Unnormalized weight; renormalized over the round's participants.
    pub alpha: f64,
    pub local_steps: usize,
    /// Scaffold control-variate change.
    pub c_delta: Option<ParamVector>,
}

/// `m` distinct client ids out of `0..n`, uniformly, in ascending order.
pub fn sample_clients(n: usize, m: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::arg("participants", format!("need 1 <= M <= N, got M={m}, N={n}")));
    }
    let mut ids = index::sample(rng, n, m).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Parameters sent to clients at the start of a round.
pub fn broadcast(server: &ServerState) -> ParamVector {
    match server.strategy {
        ServerStrategy::Fedacg => {
            let mut p = server.theta.clone();
            p.axpy(server.hyper.lambda_acg, &server.momentum);
            p
        }
        _ => server.theta.clone(),
    }
}

fn weighted_sum<'a>(weights: &[f64], vecs: impl Iterator<Item = &'a ParamVector>, len: usize) -> ParamVector {
    let mut acc = ParamVector::zeros(len);
    for (a, v) in weights.iter().zip(vecs) {
        acc.axpy(*a, v);
    }
    acc
}

/// Combine one round of client updates into the next server state.
///
/// Updates are processed in ascending `client_id` order, so the result does
/// not depend on the order they arrive in.
pub fn aggregate(server: &ServerState, updates: &[ClientUpdate]) -> Result<ServerState> {
    if updates.is_empty() {
        return Err(Error::Empty("no client updates to aggregate".into()));
    }
    let len = server.theta.len();
    for u in updates {
        u.w_e.check_len("client update", len)?;
        if !(u.alpha >= 0.0) {
            return Err(Error::arg("alpha", format!("client {} has weight {}", u.client_id, u.alpha)));
        }
    }
    let mut sorted: Vec<&ClientUpdate> = updates.iter().collect();
    sorted.sort_by_key(|u| u.client_id);
    let total: f64 = sorted.iter().map(|u| u.alpha).sum();
    if !(total > 0.0) {
        return Err(Error::arg("alpha", "participant weights sum to zero"));
    }
    let alphas: Vec<f64> = sorted.iter().map(|u| u.alpha / total).collect();
    let theta = &server.theta;
    let deltas = || sorted.iter().map(|u| u.w_e.sub(theta));

    let mut next = server.clone();
    next.round += 1;
    match server.strategy {
        ServerStrategy::Fedavg | ServerStrategy::Fedprox => {
            next.theta = weighted_sum(&alphas, sorted.iter().map(|u| &u.w_e), len);
        }
        ServerStrategy::Scaffold => {
            let step: Vec<ParamVector> = deltas().collect();
            let mut t = theta.clone();
            t.axpy(server.hyper.global_lr, &weighted_sum(&alphas, step.iter(), len));
            next.theta = t;
            let c_deltas: Vec<&ParamVector> = sorted.iter().filter_map(|u| u.c_delta.as_ref()).collect();
            if !c_deltas.is_empty() {
                let m = c_deltas.len() as f64;
                let mut mean = ParamVector::zeros(len);
                for d in &c_deltas {
                    d.check_len("control variate delta", len)?;
                    mean.axpy(1.0 / m, d);
                }
                next.c_global.axpy(m / server.n_clients.max(1) as f64, &mean);
            }
        }
        ServerStrategy::Fednova => {
            if let Some(u) = sorted.iter().find(|u| u.local_steps == 0) {
                return Err(Error::arg("local_steps", format!("client {} reported zero steps", u.client_id)));
            }
            let tau_eff: f64 = sorted.iter().zip(&alphas).map(|(u, a)| a * u.local_steps as f64).sum();
            let normalized: Vec<ParamVector> = sorted
                .iter()
                .map(|u| u.w_e.sub(theta).scaled(1.0 / u.local_steps as f64))
                .collect();
            let mut t = theta.clone();
            t.axpy(tau_eff, &weighted_sum(&alphas, normalized.iter(), len));
            next.theta = t;
        }
        ServerStrategy::Fedexp => {
            let step: Vec<ParamVector> = deltas().collect();
            let mean = weighted_sum(&alphas, step.iter(), len);
            let m = step.len() as f64;
            let sum_sq: f64 = step.iter().map(|d| d.norm_sq()).sum();
            let eta = (sum_sq / (2.0 * m * (mean.norm_sq() + server.hyper.eps_exp))).max(1.0);
            let mut t = theta.clone();
            t.axpy(eta, &mean);
            next.theta = t;
        }
        ServerStrategy::Fedacg => {
            // Clients started from the lookahead point, so the round's
            // progress is measured from there.
            let avg = weighted_sum(&alphas, sorted.iter().map(|u| &u.w_e), len);
            let progress = avg.sub(&broadcast(server));
            let mut m = server.momentum.scaled(server.hyper.lambda_acg);
            m.axpy(1.0, &progress);
            let mut t = theta.clone();
            t.axpy(1.0, &m);
            next.theta = t;
            next.momentum = m;
        }
    }
    Ok(next)
}
