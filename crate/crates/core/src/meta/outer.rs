use rand::Rng;
use rand_distr::StandardNormal;

use super::inner::{inner_loop_obj, meta_grad_exact_obj};
use super::{MetaGradMode, MetaHyperparams, MetaStrategy};
use crate::data::{sample_minibatch, TaskData};
use crate::nn::{clip_grad_norm, optimizer_step, Architecture, Batch, MseObjective, Objective, OptimizerState, ParamVector};
use crate::rng::SimRng;
use crate::server::LocalModifier;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterDiagnostics {
    pub gamma: f64,
    /// `L(w_{i+1}, B_K) - L(w_i, B_K)`.
    pub delta_l: f64,
    /// Mean inner-loop loss (the query loss at `w_i` when `K = 0`).
    pub inner_loss: f64,
    /// Value of the objective the outer step descends.
    pub outer_loss: f64,
    /// `|grad L(w_i, B_K)|^2`.
    pub gk_sq_norm: f64,
}

/// One outer step on a fixed batch schedule.
///
/// `schedule` holds one objective per inner step and `query` the outer
/// objective on `B_K`. `noise` feeds meta-NSGD only; `opt` applies the
/// resulting direction (plain SGD reproduces `w - lr * direction`).
#[allow(clippy::too_many_arguments)]
pub fn outer_step_obj(
    strategy: MetaStrategy,
    w: &ParamVector,
    schedule: &[&dyn Objective],
    query: &dyn Objective,
    hp: &MetaHyperparams,
    gamma: f64,
    modifier: &LocalModifier,
    opt: &mut OptimizerState,
    noise: &mut SimRng,
) -> Result<(ParamVector, OuterDiagnostics)> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::arg("gamma", format!("{gamma} outside [0, 1]")));
    }
    let trace = inner_loop_obj(w, schedule, hp.lambda_i, hp.clip_norm);
    let (loss_w, g_k) = query.loss_and_grad(w);
    let adapted = trace.adapted();

    let (mut direction, outer_loss, lr) = match strategy {
        MetaStrategy::Maml => {
            let g = meta_grad_exact_obj(&trace, schedule, query, hp.lambda_i, hp.clip_norm);
            (g, query.loss(adapted), hp.lambda_o)
        }
        MetaStrategy::Fomaml => {
            let (l, g) = query.loss_and_grad(adapted);
            (g, l, hp.lambda_o)
        }
        MetaStrategy::Reptile => (w.sub(adapted), query.loss(adapted), hp.reptile_rate),
        MetaStrategy::MetaNsgd => {
            let (l, g) = query.loss_and_grad(adapted);
            let mut g = clip_grad_norm(&g, hp.nsgd.clip);
            let sigma = hp.nsgd.sigma();
            for v in g.iter_mut() {
                *v += sigma * noise.sample::<f64, _>(StandardNormal);
            }
            (g, l, hp.lambda_o)
        }
        MetaStrategy::Fedmenf => {
            let (l, mut g) = match hp.meta_grad_mode {
                MetaGradMode::Exact => (
                    query.loss(adapted),
                    meta_grad_exact_obj(&trace, schedule, query, hp.lambda_i, hp.clip_norm),
                ),
                MetaGradMode::FirstOrder => query.loss_and_grad(adapted),
            };
            if gamma != 0.0 {
                g.axpy(-gamma, &g_k);
            }
            (g, l - gamma * loss_w, hp.lambda_o)
        }
    };
    modifier.correct_gradient(w, &mut direction);
    let direction = clip_grad_norm(&direction, hp.clip_norm);
    let (next, state) = optimizer_step(opt, w, &direction, lr);
    *opt = state;

    let delta_l = query.loss(&next) - loss_w;
    let inner_loss = if trace.losses.is_empty() {
        loss_w
    } else {
        trace.losses.iter().sum::<f64>() / trace.losses.len() as f64
    };
    let gamma = if strategy == MetaStrategy::Fedmenf { gamma } else { 0.0 };
    Ok((
        next,
        OuterDiagnostics {
            gamma,
            delta_l,
            inner_loss,
            outer_loss: outer_loss + modifier.penalty(w),
            gk_sq_norm: g_k.norm_sq(),
        },
    ))
}

/// Sampled batches of one outer step: `K` support minibatches and `B_K`.
pub(crate) fn sample_step_batches(task: &TaskData, hp: &MetaHyperparams, rng: &mut SimRng) -> (Vec<Batch>, Batch) {
    let inner = (0..hp.inner_steps)
        .map(|_| sample_minibatch(&task.support, hp.inner_batch, rng))
        .collect();
    let query = sample_minibatch(&task.query, hp.outer_batch, rng);
    (inner, query)
}

/// One outer step on a neural-field task: samples the inner batches and
/// `B_K` from `rng`, then applies [`outer_step_obj`].
#[allow(clippy::too_many_arguments)]
pub fn outer_step(
    strategy: MetaStrategy,
    w: &ParamVector,
    arch: &Architecture,
    task: &TaskData,
    hp: &MetaHyperparams,
    gamma: f64,
    modifier: &LocalModifier,
    opt: &mut OptimizerState,
    rng: &mut SimRng,
    noise: &mut SimRng,
) -> Result<(ParamVector, OuterDiagnostics)> {
    w.check_len("params", arch.param_count())?;
    let (inner, query) = sample_step_batches(task, hp, rng);
    let objs: Vec<MseObjective> = inner.iter().map(|b| MseObjective::new(arch, b)).collect::<Result<_>>()?;
    let schedule: Vec<&dyn Objective> = objs.iter().map(|o| o as &dyn Objective).collect();
    let query = MseObjective::new(arch, &query)?;
    outer_step_obj(strategy, w, &schedule, &query, hp, gamma, modifier, opt, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Quadratic;
    use crate::rng;

    fn toy() -> (Quadratic, Quadratic, Quadratic, ParamVector) {
        let q0 = Quadratic::new(vec![2.0, 0.5, 0.5, 1.0], vec![1.0, -1.0]).unwrap();
        let q1 = Quadratic::new(vec![1.0, 0.2, 0.2, 3.0], vec![0.0, 2.0]).unwrap();
        let qq = Quadratic::new(vec![1.5, -0.3, -0.3, 0.7], vec![0.5, 0.5]).unwrap();
        (q0, q1, qq, ParamVector::new(vec![0.3, 0.4]))
    }

    fn run(strategy: MetaStrategy, hp: &MetaHyperparams, gamma: f64) -> (ParamVector, OuterDiagnostics) {
        let (q0, q1, qq, w) = toy();
        let mut opt = OptimizerState::sgd();
        outer_step_obj(
            strategy,
            &w,
            &[&q0, &q1],
            &qq,
            hp,
            gamma,
            &LocalModifier::Identity,
            &mut opt,
            &mut rng::from_seed(1),
        )
        .unwrap()
    }

    #[test]
    fn fedmenf_gamma_zero_is_maml_bitwise() {
        let hp = MetaHyperparams { lambda_i: 0.05, lambda_o: 0.1, ..Default::default() };
        let (a, da) = run(MetaStrategy::Maml, &hp, 0.0);
        let (b, db) = run(MetaStrategy::Fedmenf, &hp, 0.0);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(da.delta_l.to_bits(), db.delta_l.to_bits());
    }

    #[test]
    fn zero_outer_rate_is_identity() {
        let (_, _, _, w) = toy();
        let hp = MetaHyperparams { lambda_o: 0.0, reptile_rate: 0.0, ..Default::default() };
        for s in [
            MetaStrategy::Maml,
            MetaStrategy::Fomaml,
            MetaStrategy::Reptile,
            MetaStrategy::MetaNsgd,
            MetaStrategy::Fedmenf,
        ] {
            let (next, d) = run(s, &hp, 0.5);
            assert_eq!(next, w, "{s:?}");
            assert_eq!(d.delta_l, 0.0);
        }
    }

    #[test]
    fn fomaml_uses_adapted_gradient() {
        let (q0, q1, qq, w) = toy();
        let hp = MetaHyperparams { lambda_i: 0.05, lambda_o: 0.1, ..Default::default() };
        let (next, _) = run(MetaStrategy::Fomaml, &hp, 0.0);
        let adapted = inner_loop_obj(&w, &[&q0, &q1], 0.05, 5.0);
        let g = qq.grad(adapted.adapted());
        for i in 0..2 {
            assert!((next[i] - (w[i] - 0.1 * g[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn reptile_interpolates() {
        let (q0, q1, _, w) = toy();
        let hp = MetaHyperparams { lambda_i: 0.05, reptile_rate: 0.5, ..Default::default() };
        let (next, _) = run(MetaStrategy::Reptile, &hp, 0.0);
        let phi = inner_loop_obj(&w, &[&q0, &q1], 0.05, 5.0).adapted().clone();
        for i in 0..2 {
            assert!((next[i] - (w[i] + 0.5 * (phi[i] - w[i]))).abs() < 1e-15);
        }
    }

    #[test]
    fn nsgd_without_noise_is_fomaml() {
        let mut hp = MetaHyperparams { lambda_i: 0.05, lambda_o: 0.1, ..Default::default() };
        hp.nsgd.epsilon = f64::INFINITY;
        hp.nsgd.clip = 1e6;
        assert_eq!(hp.nsgd.sigma(), 0.0);
        let (a, _) = run(MetaStrategy::MetaNsgd, &hp, 0.0);
        let (b, _) = run(MetaStrategy::Fomaml, &hp, 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_out_of_range() {
        let (q0, _, qq, w) = toy();
        let hp = MetaHyperparams::default();
        let err = outer_step_obj(
            MetaStrategy::Fedmenf,
            &w,
            &[&q0],
            &qq,
            &hp,
            1.5,
            &LocalModifier::Identity,
            &mut OptimizerState::sgd(),
            &mut rng::from_seed(0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn fedmenf_full_gamma_removes_query_gradient() {
        // With gamma = 1 the update is -lambda_o * (g_M - g_K) ~ lambda_o * lambda_i * I_K.
        let (q0, q1, qq, w) = toy();
        let lambda_i = 1e-4;
        let hp = MetaHyperparams { lambda_i, lambda_o: 0.1, clip_norm: f64::INFINITY, ..Default::default() };
        let (next, _) = run(MetaStrategy::Fedmenf, &hp, 1.0);
        let ik = crate::meta::inner_product_term_obj(&w, &[&q0, &q1], &qq);
        let step = next.sub(&w);
        let predicted = ik.scaled(0.1 * lambda_i);
        let err = step.sub(&predicted).norm();
        assert!(err < 1e-2 * predicted.norm(), "err {err} vs {}", predicted.norm());
    }
}
