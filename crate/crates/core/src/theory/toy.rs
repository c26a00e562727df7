use rand::Rng;

use crate::data::{gen_synthetic_signal, SignalKind};
use crate::nn::{siren_init, Architecture, Batch, MseObjective, Objective, ParamVector, Quadratic};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum ToyKind {
    /// One quadratic per inner step plus the query quadratic.
    Quadratic { schedule: Vec<Quadratic>, query: Quadratic },
    /// A small SIREN with fixed batches.
    TinySiren { arch: Architecture, schedule: Vec<Batch>, query: Batch },
}

/// A meta-learning problem with fixed batches: `K` inner objectives, the
/// query objective, the evaluation point `w` and the inner step size.
#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub kind: ToyKind,
    pub w: ParamVector,
    pub lambda_i: f64,
}

/// Largest parameter count accepted for the SIREN toy.
pub const TINY_SIREN_MAX_PARAMS: usize = 64;

fn is_psd(q: &Quadratic) -> bool {
    // Cholesky of A + tiny * I succeeds iff A is (numerically) PSD.
    let n = q.dim();
    let a = q.matrix();
    let shift = 1e-12 * (1.0 + (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max));
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j] + if i == j { shift } else { 0.0 };
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

fn random_spd(dim: usize, r: &mut impl Rng) -> Vec<f64> {
    let b: Vec<f64> = (0..dim * dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut a = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let s: f64 = (0..dim).map(|k| b[i * dim + k] * b[j * dim + k]).sum();
            a[i * dim + j] = s / dim as f64 + if i == j { 0.5 } else { 0.0 };
        }
    }
    a
}

impl ToyProblem {
    pub fn new(kind: ToyKind, w: ParamVector, lambda_i: f64) -> Result<Self> {
        if !(lambda_i.is_finite() && lambda_i >= 0.0) {
            return Err(Error::arg("lambda_i", format!("must be finite and >= 0, got {lambda_i}")));
        }
        match &kind {
            ToyKind::Quadratic { schedule, query } => {
                for (k, q) in schedule.iter().chain(std::iter::once(query)).enumerate() {
                    if q.dim() != w.len() {
                        return Err(Error::ShapeMismatch { what: "quadratic dim", expected: w.len(), got: q.dim() });
                    }
                    if !is_psd(q) {
                        return Err(Error::arg("quadratic matrix", format!("objective {k} is not positive semi-definite")));
                    }
                }
            }
            ToyKind::TinySiren { arch, schedule, query } => {
                if arch.param_count() > TINY_SIREN_MAX_PARAMS {
                    return Err(Error::arg(
                        "arch",
                        format!("{} parameters exceeds {TINY_SIREN_MAX_PARAMS}", arch.param_count()),
                    ));
                }
                w.check_len("w", arch.param_count())?;
                for b in schedule.iter().chain(std::iter::once(query)) {
                    MseObjective::new(arch, b)?;
                }
            }
        }
        Ok(Self { kind, w, lambda_i })
    }

    /// Random quadratic toy in `dim` dimensions with `k` inner objectives.
    /// Centers sit at distance ~`grad_scale` from `w`, which keeps the
    /// gradients at that scale.
    pub fn random_quadratic(dim: usize, k: usize, grad_scale: f64, lambda_i: f64, seed: u64) -> Result<Self> {
        let mut r = rng::from_seed(seed);
        let w: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let make = |r: &mut rng::SimRng| -> Result<Quadratic> {
            let a = random_spd(dim, r);
            let c: Vec<f64> = w.iter().map(|wi| wi + grad_scale * r.random_range(-1.0..1.0)).collect();
            Quadratic::new(a, c)
        };
        let schedule = (0..k).map(|_| make(&mut r)).collect::<Result<_>>()?;
        let query = make(&mut r)?;
        Self::new(ToyKind::Quadratic { schedule, query }, ParamVector::new(w), lambda_i)
    }

    /// Random SIREN toy on `[2, 7, 4, 1]` (58 parameters) fitting a smooth
    /// 8x8 signal; every batch holds `batch` random grid points.
    pub fn random_tiny_siren(k: usize, batch: usize, omega0: f64, lambda_i: f64, seed: u64) -> Result<Self> {
        let arch = Architecture::new(vec![2, 7, 4, 1], omega0, crate::nn::Activation::Sine)?;
        let sig = gen_synthetic_signal(SignalKind::RandSmooth, &[8, 8], 1, seed)?.to_batch();
        let mut r = rng::derive(seed, &[1]);
        let mut pick = || {
            let idx: Vec<usize> = (0..batch).map(|_| r.random_range(0..sig.len())).collect();
            sig.select(&idx)
        };
        let schedule = (0..k).map(|_| pick()).collect();
        let query = pick();
        let w = siren_init(&arch, rng::derive_seed(seed, &[2]));
        Self::new(ToyKind::TinySiren { arch, schedule, query }, w, lambda_i)
    }

    pub fn inner_steps(&self) -> usize {
        match &self.kind {
            ToyKind::Quadratic { schedule, .. } => schedule.len(),
            ToyKind::TinySiren { schedule, .. } => schedule.len(),
        }
    }

    /// Run `f` with the inner schedule and query objective.
    pub fn with_objectives<R>(&self, f: impl FnOnce(&[&dyn Objective], &dyn Objective) -> R) -> Result<R> {
        match &self.kind {
            ToyKind::Quadratic { schedule, query } => {
                let s: Vec<&dyn Objective> = schedule.iter().map(|q| q as &dyn Objective).collect();
                Ok(f(&s, query))
            }
            ToyKind::TinySiren { arch, schedule, query } => {
                let objs: Vec<MseObjective> = schedule.iter().map(|b| MseObjective::new(arch, b)).collect::<Result<_>>()?;
                let s: Vec<&dyn Objective> = objs.iter().map(|o| o as &dyn Objective).collect();
                let q = MseObjective::new(arch, query)?;
                Ok(f(&s, &q))
            }
        }
    }
}
