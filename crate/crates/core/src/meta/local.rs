use rand::Rng;

use super::outer::{outer_step_obj, sample_step_batches};
use super::{adaptive_gamma, GammaMode, MetaHyperparams, MetaStrategy};
use crate::data::TaskData;
use crate::nn::{Architecture, MseObjective, Objective, OptimizerState, ParamVector};
use crate::rng::{self, SimRng};
use crate::server::LocalModifier;
use crate::{Error, Result};

/// One client's private training data.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub tasks: Vec<TaskData>,
    /// Aggregation weight, proportional to the number of tasks.
    pub weight: f64,
}

/// Federation-level quantities the adaptive coefficient needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FederationContext {
    pub n_clients: usize,
    pub rounds: usize,
    pub participants: usize,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdateResult {
    pub w_e: ParamVector,
    pub gamma_trace: Vec<f64>,
    pub delta_l_trace: Vec<f64>,
    pub inner_loss_trace: Vec<f64>,
    pub outer_loss_trace: Vec<f64>,
    pub gk_sq_trace: Vec<f64>,
    /// Number of local gradient steps, used by FedNova.
    pub local_steps: usize,
}

/// `LocalUpdate`: starting from `theta`, run `E` outer steps, each on a task
/// drawn uniformly (with replacement) from the client's tasks.
pub fn local_update(
    theta: &ParamVector,
    arch: &Architecture,
    client: &ClientState,
    hp: &MetaHyperparams,
    ctx: &FederationContext,
    modifier: &LocalModifier,
    rng: &mut SimRng,
) -> Result<LocalUpdateResult> {
    if client.tasks.is_empty() {
        return Err(Error::Empty(format!("client {} has no training tasks", client.id)));
    }
    hp.validate()?;
    theta.check_len("theta", arch.param_count())?;

    let e = hp.outer_steps;
    let mut noise = rng::derive(hp.nsgd.noise_seed, &[ctx.round as u64, client.id as u64]);
    let mut opt = OptimizerState::for_kind(hp.outer_optimizer, theta.len());
    let mut w = theta.clone();
    let mut out = LocalUpdateResult {
        w_e: ParamVector::default(),
        gamma_trace: Vec::with_capacity(e),
        delta_l_trace: Vec::with_capacity(e),
        inner_loss_trace: Vec::with_capacity(e),
        outer_loss_trace: Vec::with_capacity(e),
        gk_sq_trace: Vec::with_capacity(e),
        local_steps: e * hp.inner_steps.max(1),
    };
    for _ in 0..e {
        let task = &client.tasks[rng.random_range(0..client.tasks.len())];
        let (inner, query_batch) = sample_step_batches(task, hp, rng);
        let objs: Vec<MseObjective> = inner.iter().map(|b| MseObjective::new(arch, b)).collect::<Result<_>>()?;
        let schedule: Vec<&dyn Objective> = objs.iter().map(|o| o as &dyn Objective).collect();
        let query = MseObjective::new(arch, &query_batch)?;
        let gamma = match (hp.strategy, hp.gamma_mode) {
            (MetaStrategy::Fedmenf, GammaMode::Fixed(g)) => g,
            (MetaStrategy::Fedmenf, GammaMode::Adaptive(zeta)) => {
                let gk_sq = query.grad(&w).norm_sq();
                if gk_sq > 0.0 {
                    adaptive_gamma(zeta, ctx.n_clients, ctx.rounds.max(1), e, ctx.participants, hp.lambda_o, gk_sq)?
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        let (next, diag) = outer_step_obj(
            hp.strategy, &w, &schedule, &query, hp, gamma, modifier, &mut opt, &mut noise,
        )?;
        w = next;
        out.gamma_trace.push(diag.gamma);
        out.delta_l_trace.push(diag.delta_l);
        out.inner_loss_trace.push(diag.inner_loss);
        out.outer_loss_trace.push(diag.outer_loss);
        out.gk_sq_trace.push(diag.gk_sq_norm);
    }
    out.w_e = w;
    Ok(out)
}
