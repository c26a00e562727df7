use super::MetaHyperparams;
use crate::data::sample_minibatch;
use crate::nn::{clip_grad_norm, Architecture, Batch, MseObjective, Objective, ParamVector};
use crate::rng::SimRng;
use crate::Result;

/// Trajectory of the inner loop: `phis[k]` is the point at which step `k`
/// evaluated its gradient `grads[k]` (before clipping); `phis[K]` is the
/// adapted parameter vector.
#[derive(Debug, Clone)]
pub struct InnerTrace {
    pub phis: Vec<ParamVector>,
    pub grads: Vec<ParamVector>,
    pub losses: Vec<f64>,
}

impl InnerTrace {
    pub fn adapted(&self) -> &ParamVector {
        self.phis.last().expect("trace starts with w")
    }
}

/// `phi_{k+1} = phi_k - lambda_i * clip(grad L_k(phi_k))` over the schedule.
pub fn inner_loop_obj(w: &ParamVector, schedule: &[&dyn Objective], lambda_i: f64, clip_norm: f64) -> InnerTrace {
    let mut phis = Vec::with_capacity(schedule.len() + 1);
    let mut grads = Vec::with_capacity(schedule.len());
    let mut losses = Vec::with_capacity(schedule.len());
    phis.push(w.clone());
    for obj in schedule {
        let phi = phis.last().unwrap();
        let (loss, g) = obj.loss_and_grad(phi);
        let mut next = phi.clone();
        next.axpy(-lambda_i, &clip_grad_norm(&g, clip_norm));
        losses.push(loss);
        grads.push(g);
        phis.push(next);
    }
    InnerTrace { phis, grads, losses }
}

/// Exact derivative of `L_K(phi_K(w))` with respect to `w`, by pulling the
/// query gradient back through every recorded inner step.
///
/// Each step contributes the transposed Jacobian `I - lambda_i H_k J_k`,
/// where `J_k` is the Jacobian of gradient clipping (the identity whenever
/// the clip is inactive).
pub fn meta_grad_exact_obj(
    trace: &InnerTrace,
    schedule: &[&dyn Objective],
    query: &dyn Objective,
    lambda_i: f64,
    clip_norm: f64,
) -> ParamVector {
    assert_eq!(trace.grads.len(), schedule.len(), "trace and schedule disagree");
    let mut v = query.grad(trace.adapted());
    for k in (0..schedule.len()).rev() {
        let g = &trace.grads[k];
        let norm = g.norm();
        let u = if norm > clip_norm {
            // d/dg [g * c/|g|] = (c/|g|) (I - g g^T / |g|^2)
            let proj = g.dot(&v) / (norm * norm);
            let mut u = v.clone();
            u.axpy(-proj, g);
            u.scale(clip_norm / norm);
            u
        } else {
            v.clone()
        };
        let hu = schedule[k].hvp(&trace.phis[k], &u);
        v.axpy(-lambda_i, &hu);
    }
    v
}

/// `sum_k (H_K g_k + H_k g_K)` with every gradient and Hessian taken at `w`.
pub fn inner_product_term_obj(w: &ParamVector, schedule: &[&dyn Objective], query: &dyn Objective) -> ParamVector {
    let mut acc = ParamVector::zeros(w.len());
    if schedule.is_empty() {
        return acc;
    }
    let g_query = query.grad(w);
    for obj in schedule {
        let g_k = obj.grad(w);
        acc.axpy(1.0, &query.hvp(w, &g_k));
        acc.axpy(1.0, &obj.hvp(w, &g_query));
    }
    acc
}

fn objectives<'a>(arch: &'a Architecture, batches: &'a [Batch]) -> Result<Vec<MseObjective<'a>>> {
    batches.iter().map(|b| MseObjective::new(arch, b)).collect()
}

fn as_dyn<'a>(objs: &'a [MseObjective<'a>]) -> Vec<&'a dyn Objective> {
    objs.iter().map(|o| o as &dyn Objective).collect()
}

/// Run `hp.inner_steps` clipped SGD steps from `w` on minibatches of `support`.
///
/// Returns the adapted parameters and the exact batches used, so the
/// trajectory can be replayed for meta-gradients.
pub fn inner_loop(
    w: &ParamVector,
    arch: &Architecture,
    support: &Batch,
    hp: &MetaHyperparams,
    rng: &mut SimRng,
) -> Result<(ParamVector, Vec<Batch>)> {
    w.check_len("params", arch.param_count())?;
    let batches: Vec<Batch> = (0..hp.inner_steps)
        .map(|_| sample_minibatch(support, hp.inner_batch, rng))
        .collect();
    let objs = objectives(arch, &batches)?;
    let trace = inner_loop_obj(w, &as_dyn(&objs), hp.lambda_i, hp.clip_norm);
    Ok((trace.adapted().clone(), batches))
}

/// Exact meta-gradient of `L(phi_K, query_batch)` at `w` for a recorded
/// batch schedule.
pub fn meta_grad_exact(
    w: &ParamVector,
    arch: &Architecture,
    inner_batches: &[Batch],
    query_batch: &Batch,
    hp: &MetaHyperparams,
) -> Result<ParamVector> {
    w.check_len("params", arch.param_count())?;
    let objs = objectives(arch, inner_batches)?;
    let schedule = as_dyn(&objs);
    let query = MseObjective::new(arch, query_batch)?;
    let trace = inner_loop_obj(w, &schedule, hp.lambda_i, hp.clip_norm);
    Ok(meta_grad_exact_obj(&trace, &schedule, &query, hp.lambda_i, hp.clip_norm))
}

/// Network version of [`inner_product_term_obj`].
pub fn inner_product_term(
    w: &ParamVector,
    arch: &Architecture,
    inner_batches: &[Batch],
    query_batch: &Batch,
) -> Result<ParamVector> {
    w.check_len("params", arch.param_count())?;
    let objs = objectives(arch, inner_batches)?;
    let query = MseObjective::new(arch, query_batch)?;
    Ok(inner_product_term_obj(w, &as_dyn(&objs), &query))
}
