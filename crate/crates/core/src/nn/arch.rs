use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sine,
    Relu,
}

impl Activation {
    #[inline]
    pub(crate) fn eval(self, s: f64) -> f64 {
        match self {
            Activation::Sine => s.sin(),
            Activation::Relu => s.max(0.0),
        }
    }

    #[inline]
    pub(crate) fn d1(self, s: f64) -> f64 {
        match self {
            Activation::Sine => s.cos(),
            Activation::Relu => {
                if s > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub(crate) fn d2(self, s: f64) -> f64 {
        match self {
            Activation::Sine => -s.sin(),
            Activation::Relu => 0.0,
        }
    }
}

/// Shape and offsets of one dense layer inside a [`ParamVector`](super::ParamVector).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.weight_offset + self.rows * self.cols
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.rows
    }
}

/// Layer widths plus the frequency scales.
///
/// Hidden layers compute `act(omega_l * (W x + b))` where `omega_1 = omega0`
/// and `omega_l = omega_hidden` afterwards (1 unless changed with
/// [`Architecture::with_omega_hidden`]); the final layer is affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    layer_dims: Vec<usize>,
    omega0: f64,
    #[serde(default)]
    activation: Activation,
    #[serde(default = "unit")]
    omega_hidden: f64,
}

fn unit() -> f64 {
    1.0
}

impl Architecture {
    pub fn new(layer_dims: Vec<usize>, omega0: f64, activation: Activation) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least 2 layer dims, got {}",
                layer_dims.len()
            )));
        }
        if let Some(i) = layer_dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArchitecture(format!("layer dim {i} is zero")));
        }
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::InvalidArchitecture(format!(
                "omega0 must be positive, got {omega0}"
            )));
        }
        Ok(Self {
            layer_dims,
            omega0,
            activation,
            omega_hidden: 1.0,
        })
    }

    /// Set the frequency scale of hidden layers after the first. Setting it
    /// to `omega0` gives the sine-network variant that rescales every layer.
    pub fn with_omega_hidden(mut self, omega_hidden: f64) -> Result<Self> {
        if !(omega_hidden > 0.0 && omega_hidden.is_finite()) {
            return Err(Error::InvalidArchitecture(format!(
                "omega_hidden must be positive, got {omega_hidden}"
            )));
        }
        self.omega_hidden = omega_hidden;
        Ok(self)
    }

    /// Sine network with `omega0 = 30`.
    pub fn siren(layer_dims: Vec<usize>) -> Result<Self> {
        Self::new(layer_dims, 30.0, Activation::Sine)
    }

    /// Sine network with `layers` dense layers of width `hidden` (the last
    /// one maps to `output`).
    pub fn siren_uniform(input: usize, hidden: usize, layers: usize, output: usize, omega0: f64) -> Result<Self> {
        if layers < 1 {
            return Err(Error::InvalidArchitecture("need at least 1 layer".into()));
        }
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(hidden, layers - 1));
        dims.push(output);
        Self::new(dims, omega0, Activation::Sine)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn omega_hidden(&self) -> f64 {
        self.omega_hidden
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Number of dense layers (one fewer than the number of dims).
    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub(crate) fn omega(&self, layer: usize) -> f64 {
        if layer == 0 {
            self.omega0
        } else {
            self.omega_hidden
        }
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.layer_dims
            .windows(2)
            .map(|w| {
                let (cols, rows) = (w[0], w[1]);
                let shape = LayerShape {
                    rows,
                    cols,
                    weight_offset: offset,
                    bias_offset: offset + rows * cols,
                };
                offset += rows * cols + rows;
                shape
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }
}
