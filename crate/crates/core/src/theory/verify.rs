use serde::{Deserialize, Serialize};

use super::{ScalingReport, ToyProblem};
use crate::meta::{inner_loop_obj, inner_product_term_obj, meta_grad_exact_obj, outer_step_obj, MetaHyperparams, MetaStrategy};
use crate::nn::OptimizerState;
use crate::rng;
use crate::server::LocalModifier;
use crate::{Error, Result};

/// Pass criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub slope_min: f64,
    pub slope_max: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub r_squared_min: f64,
    /// Max `|dL(γ=1)| / |dL(γ=0)|`.
    pub residual_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            slope_min: 1.7,
            slope_max: 2.3,
            ratio_min: 0.9,
            ratio_max: 1.1,
            r_squared_min: 0.99,
            residual_max: 0.05,
        }
    }
}

fn check_lambdas(lambdas: &[f64], name: &'static str) -> Result<()> {
    if lambdas.len() < 3 {
        return Err(Error::arg(name, format!("need at least 3 values, got {}", lambdas.len())));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::arg(name, "values must be positive and finite"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::arg(name, "values must be strictly decreasing"));
    }
    Ok(())
}

/// Least-squares slope of `y` against `x`.
fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn theory_hyper(strategy: MetaStrategy, lambda_i: f64, lambda_o: f64, inner_steps: usize) -> MetaHyperparams {
    MetaHyperparams {
        strategy,
        inner_steps,
        lambda_i,
        lambda_o,
        clip_norm: f64::INFINITY,
        ..Default::default()
    }
}

/// Meta-gradient approximation error `||g_M - (g_K - lambda_i I_K)||` for
/// each `lambda_i`, and its log-log slope (expected ≈ 2).
pub fn verify_prop1(problem: &ToyProblem, lambdas: &[f64], th: &Thresholds) -> Result<ScalingReport> {
    check_lambdas(lambdas, "lambda_i")?;
    let w = &problem.w;
    let errors = problem.with_objectives(|schedule, query| {
        let g_k = query.grad(w);
        let all_zero = g_k.norm_sq() == 0.0 && schedule.iter().all(|o| o.grad(w).norm_sq() == 0.0);
        if all_zero {
            return Err(Error::arg("problem", "all gradients vanish at w"));
        }
        let i_k = inner_product_term_obj(w, schedule, query);
        Ok(lambdas
            .iter()
            .map(|&lam| {
                let trace = inner_loop_obj(w, schedule, lam, f64::INFINITY);
                let exact = meta_grad_exact_obj(&trace, schedule, query, lam, f64::INFINITY);
                let mut approx = g_k.clone();
                approx.axpy(-lam, &i_k);
                exact.sub(&approx).norm()
            })
            .collect::<Vec<_>>())
    })??;
    if errors.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::arg("problem", "approximation error is zero or non-finite; slope undefined"));
    }
    let lx: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let slope = fit_slope(&lx, &ly);
    let pass = (th.slope_min..=th.slope_max).contains(&slope);
    Ok(ScalingReport {
        proposition: 1,
        lambdas: lambdas.to_vec(),
        gammas: vec![0.0; lambdas.len()],
        ratios: vec![f64::NAN; lambdas.len()],
        errors,
        slope: Some(slope),
        r_squared: None,
        pass,
        detail: format!("slope {slope:.4}, accepted [{}, {}]", th.slope_min, th.slope_max),
    })
}

/// Loss change `L(w', B_K) - L(w, B_K)` after one outer step of `strategy`
/// with outer step size `lambda_o` (plain SGD, no clipping), together with
/// `||g_K||²` at `w`.
pub fn loss_change(problem: &ToyProblem, strategy: MetaStrategy, lambda_o: f64, gamma: f64) -> Result<(f64, f64)> {
    let hp = theory_hyper(strategy, problem.lambda_i, lambda_o, problem.inner_steps());
    problem.with_objectives(|schedule, query| {
        let mut opt = OptimizerState::sgd();
        let mut noise = rng::from_seed(0);
        let (_, diag) = outer_step_obj(
            strategy,
            &problem.w,
            schedule,
            query,
            &hp,
            gamma,
            &LocalModifier::Identity,
            &mut opt,
            &mut noise,
        )?;
        Ok((diag.delta_l, diag.gk_sq_norm))
    })?
}

fn ratio(delta_l: f64, lambda_o: f64, gk_sq: f64) -> f64 {
    let pred = -lambda_o * gk_sq;
    if pred == 0.0 {
        f64::NAN
    } else {
        delta_l / pred
    }
}

/// One-step MAML loss change against `-lambda_o ||g_K||²`.
pub fn verify_prop2(problem: &ToyProblem, lambda_os: &[f64], th: &Thresholds) -> Result<ScalingReport> {
    check_lambdas(lambda_os, "lambda_o")?;
    let mut errors = Vec::with_capacity(lambda_os.len());
    let mut ratios = Vec::with_capacity(lambda_os.len());
    for &lo in lambda_os {
        let (dl, gk) = loss_change(problem, MetaStrategy::Maml, lo, 0.0)?;
        errors.push(dl);
        ratios.push(ratio(dl, lo, gk));
    }
    let last = *ratios.last().expect("at least 3 values");
    let non_positive = errors.iter().all(|d| *d <= 0.0);
    let pass = non_positive && (th.ratio_min..=th.ratio_max).contains(&last);
    Ok(ScalingReport {
        proposition: 2,
        lambdas: lambda_os.to_vec(),
        gammas: vec![0.0; lambda_os.len()],
        errors,
        ratios,
        slope: None,
        r_squared: None,
        pass,
        detail: format!(
            "ratio at smallest lambda_o {last:.5}, accepted [{}, {}]; all dL <= 0: {non_positive}",
            th.ratio_min, th.ratio_max
        ),
    })
}

/// One-step FedMeNF loss change across `gammas` against the prediction
/// `-lambda_o (1 - γ) ||g_K||²`.
///
/// R² is measured against the prediction itself (no fitted parameters).
pub fn verify_prop3(problem: &ToyProblem, gammas: &[f64], lambda_o: f64, th: &Thresholds) -> Result<ScalingReport> {
    if gammas.len() < 2 {
        return Err(Error::arg("gamma", "need at least 2 values"));
    }
    if let Some(g) = gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::arg("gamma", format!("{g} outside [0, 1]")));
    }
    if !(lambda_o.is_finite() && lambda_o > 0.0) {
        return Err(Error::arg("lambda_o", format!("must be positive, got {lambda_o}")));
    }
    let mut errors = Vec::with_capacity(gammas.len());
    let mut ratios = Vec::with_capacity(gammas.len());
    let mut gk_sq = 0.0;
    for &g in gammas {
        let (dl, gk) = loss_change(problem, MetaStrategy::Fedmenf, lambda_o, g)?;
        gk_sq = gk;
        errors.push(dl);
        ratios.push(ratio(dl, lambda_o, gk));
    }
    let preds: Vec<f64> = gammas.iter().map(|g| -lambda_o * (1.0 - g) * gk_sq).collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let ss_tot: f64 = errors.iter().map(|e| (e - mean).powi(2)).sum();
    let ss_res: f64 = errors.iter().zip(&preds).map(|(e, p)| (e - p).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };

    let at = |target: f64| gammas.iter().position(|g| *g == target).map(|i| errors[i]);
    let residual = match (at(0.0), at(1.0)) {
        (Some(d0), Some(d1)) if d0 != 0.0 => Some((d1 / d0).abs()),
        _ => None,
    };
    let pass = r2 >= th.r_squared_min && residual.is_none_or(|r| r <= th.residual_max);
    Ok(ScalingReport {
        proposition: 3,
        lambdas: vec![lambda_o; gammas.len()],
        gammas: gammas.to_vec(),
        errors,
        ratios,
        slope: None,
        r_squared: Some(r2),
        pass,
        detail: format!(
            "R² {r2:.5} (min {}); |dL(1)|/|dL(0)| {} (max {})",
            th.r_squared_min,
            residual.map_or("n/a".into(), |r| format!("{r:.3e}")),
            th.residual_max
        ),
    })
}

/// Fraction of `seeds` whose tiny-SIREN toy shows `dL <= 0` after one MAML
/// step of size `lambda_o`.
pub fn prop2_sign_fraction(seeds: &[u64], lambda_i: f64, lambda_o: f64) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::arg("seeds", "empty"));
    }
    let mut ok = 0usize;
    for &s in seeds {
        let toy = ToyProblem::random_tiny_siren(2, 16, 30.0, lambda_i, s)?;
        let (dl, _) = loss_change(&toy, MetaStrategy::Maml, lambda_o, 0.0)?;
        if dl <= 0.0 {
            ok += 1;
        }
    }
    Ok(ok as f64 / seeds.len() as f64)
}
