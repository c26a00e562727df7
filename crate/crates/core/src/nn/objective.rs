use super::engine::{hvp_unchecked, loss_and_grad_unchecked, loss_unchecked};
use super::{Architecture, Batch, ParamVector};
use crate::{Error, Result};

/// A twice-differentiable scalar objective over a flat parameter vector.
///
/// The meta-learning routines only talk to this trait, so the same code
/// path runs on a neural field minibatch and on closed-form toys.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn loss(&self, p: &ParamVector) -> f64;
    fn loss_and_grad(&self, p: &ParamVector) -> (f64, ParamVector);
    fn hvp(&self, p: &ParamVector, v: &ParamVector) -> ParamVector;

    fn grad(&self, p: &ParamVector) -> ParamVector {
        self.loss_and_grad(p).1
    }
}

/// MSE of a network on one batch.
#[derive(Debug, Clone, Copy)]
pub struct MseObjective<'a> {
    arch: &'a Architecture,
    batch: &'a Batch,
}

impl<'a> MseObjective<'a> {
    pub fn new(arch: &'a Architecture, batch: &'a Batch) -> Result<Self> {
        if batch.coord_dim() != arch.input_dim() {
            return Err(Error::ShapeMismatch {
                what: "batch coordinate dim",
                expected: arch.input_dim(),
                got: batch.coord_dim(),
            });
        }
        if batch.value_dim() != arch.output_dim() {
            return Err(Error::ShapeMismatch {
                what: "batch value dim",
                expected: arch.output_dim(),
                got: batch.value_dim(),
            });
        }
        Ok(Self { arch, batch })
    }

    pub fn batch(&self) -> &Batch {
        self.batch
    }
}

impl Objective for MseObjective<'_> {
    fn dim(&self) -> usize {
        self.arch.param_count()
    }

    fn loss(&self, p: &ParamVector) -> f64 {
        assert_eq!(p.len(), self.dim(), "parameter length");
        loss_unchecked(p, self.arch, self.batch)
    }

    fn loss_and_grad(&self, p: &ParamVector) -> (f64, ParamVector) {
        assert_eq!(p.len(), self.dim(), "parameter length");
        loss_and_grad_unchecked(p, self.arch, self.batch)
    }

    fn hvp(&self, p: &ParamVector, v: &ParamVector) -> ParamVector {
        assert_eq!(p.len(), self.dim(), "parameter length");
        assert_eq!(v.len(), self.dim(), "direction length");
        hvp_unchecked(p, self.arch, self.batch, v)
    }
}

/// `0.5 (p - c)^T A (p - c)` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    dim: usize,
    /// Row-major `dim x dim`.
    a: Vec<f64>,
    center: Vec<f64>,
}

impl Quadratic {
    pub fn new(a: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        let dim = center.len();
        if dim == 0 {
            return Err(Error::Empty("quadratic center".into()));
        }
        if a.len() != dim * dim {
            return Err(Error::ShapeMismatch {
                what: "quadratic matrix",
                expected: dim * dim,
                got: a.len(),
            });
        }
        for i in 0..dim {
            for j in 0..i {
                if (a[i * dim + j] - a[j * dim + i]).abs() > 1e-12 {
                    return Err(Error::arg("quadratic matrix", format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { dim, a, center })
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Dense `A x`.
    pub fn apply(&self, x: &[f64]) -> ParamVector {
        (0..self.dim)
            .map(|i| self.a[i * self.dim..(i + 1) * self.dim].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect::<Vec<f64>>()
            .into()
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, p: &ParamVector) -> f64 {
        let d: Vec<f64> = p.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        0.5 * self.apply(&d).iter().zip(&d).map(|(a, b)| a * b).sum::<f64>()
    }

    fn loss_and_grad(&self, p: &ParamVector) -> (f64, ParamVector) {
        let d: Vec<f64> = p.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let g = self.apply(&d);
        let loss = 0.5 * g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        (loss, g)
    }

    fn hvp(&self, _p: &ParamVector, v: &ParamVector) -> ParamVector {
        self.apply(v)
    }
}
