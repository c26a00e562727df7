use std::ops::{Deref, DerefMut};

use crate::{Error, Result};

/// Flat parameter (or gradient, or direction) vector in canonical layer order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += alpha * v;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|v| v * alpha).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Error unless the vector has exactly `expected` entries.
    pub fn check_len(&self, what: &'static str, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::ShapeMismatch {
                what,
                expected,
                got: self.len(),
            });
        }
        Ok(())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Coordinate/value pairs, stored as two row-major matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    coords: Vec<f64>,
    targets: Vec<f64>,
    coord_dim: usize,
    value_dim: usize,
}

impl Batch {
    pub fn new(coords: Vec<f64>, targets: Vec<f64>, coord_dim: usize, value_dim: usize) -> Result<Self> {
        if coord_dim == 0 || value_dim == 0 {
            return Err(Error::arg("batch", "coordinate and value dims must be positive"));
        }
        if coords.is_empty() {
            return Err(Error::Empty("batch has no samples".into()));
        }
        if !coords.len().is_multiple_of(coord_dim) {
            return Err(Error::ShapeMismatch {
                what: "batch coords",
                expected: coords.len() / coord_dim * coord_dim,
                got: coords.len(),
            });
        }
        let n = coords.len() / coord_dim;
        if targets.len() != n * value_dim {
            return Err(Error::ShapeMismatch {
                what: "batch targets",
                expected: n * value_dim,
                got: targets.len(),
            });
        }
        Ok(Self {
            coords,
            targets,
            coord_dim,
            value_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.coord_dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord_dim(&self) -> usize {
        self.coord_dim
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn coord(&self, i: usize) -> &[f64] {
        &self.coords[i * self.coord_dim..(i + 1) * self.coord_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.value_dim..(i + 1) * self.value_dim]
    }

    /// New batch made of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut coords = Vec::with_capacity(indices.len() * self.coord_dim);
        let mut targets = Vec::with_capacity(indices.len() * self.value_dim);
        for &i in indices {
            coords.extend_from_slice(self.coord(i));
            targets.extend_from_slice(self.target(i));
        }
        Batch {
            coords,
            targets,
            coord_dim: self.coord_dim,
            value_dim: self.value_dim,
        }
    }
}
