//! WebAssembly bindings for a single-page demo of the `fedmenf` crate.
//!
//! Three operations are exposed:
//!
//! - [`FitSession`]: fit a sinusoidal network to a synthetic image step by
//!   step and render the reconstruction.
//! - [`gamma_sweep`]: one privacy-preserving outer step on a tiny network for
//!   a range of regularization coefficients, next to its first-order
//!   prediction.
//! - [`dirichlet_counts`]: a Dirichlet split of tasks across clients.

use fedmenf::data::{dirichlet_partition, gen_synthetic_signal, PartitionSpec, SignalKind};
use fedmenf::meta::MetaStrategy;
use fedmenf::nn::{forward, loss_and_grad, optimizer_step, siren_init, Architecture, Batch, OptimizerState, ParamVector};
use fedmenf::metrics::psnr;
use fedmenf::theory::{loss_change, ToyProblem};
use wasm_bindgen::prelude::*;

fn js_err(e: fedmenf::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn parse_kind(kind: &str) -> Result<SignalKind, JsError> {
    kind.parse().map_err(js_err)
}

/// Full-batch fitting of a small network to one synthetic grayscale image.
#[wasm_bindgen]
pub struct FitSession {
    arch: Architecture,
    params: ParamVector,
    opt: OptimizerState,
    batch: Batch,
    size: usize,
    lr: f64,
    steps: usize,
}

#[wasm_bindgen]
impl FitSession {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, size: usize, hidden: usize, lr: f64, seed: u64) -> Result<FitSession, JsError> {
        let signal = gen_synthetic_signal(parse_kind(kind)?, &[size, size], 1, seed).map_err(js_err)?;
        let arch = Architecture::siren(vec![2, hidden, hidden, 1])
            .and_then(|a| a.with_omega_hidden(30.0))
            .map_err(js_err)?;
        let params = siren_init(&arch, seed);
        let opt = OptimizerState::adamw(params.len()).with_weight_decay(0.0);
        Ok(FitSession { arch, params, opt, batch: signal.to_batch(), size, lr, steps: 0 })
    }

    /// Run `n` optimizer steps and return the PSNR afterwards.
    pub fn step(&mut self, n: usize) -> Result<f64, JsError> {
        for _ in 0..n {
            let (_, g) = loss_and_grad(&self.params, &self.arch, &self.batch).map_err(js_err)?;
            let (p, o) = optimizer_step(&self.opt, &self.params, &g, self.lr);
            self.params = p;
            self.opt = o;
            self.steps += 1;
        }
        self.psnr()
    }

    pub fn psnr(&self) -> Result<f64, JsError> {
        let pred = forward(&self.params, &self.arch, self.batch.coords()).map_err(js_err)?;
        psnr(&pred, self.batch.targets()).map_err(js_err)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Reconstruction as RGBA bytes (`size * size * 4`), values in [-1, 1]
    /// mapped to [0, 255].
    pub fn render(&self) -> Result<Vec<u8>, JsError> {
        let pred = forward(&self.params, &self.arch, self.batch.coords()).map_err(js_err)?;
        Ok(to_rgba(&pred))
    }

    /// The target image as RGBA bytes.
    pub fn target(&self) -> Vec<u8> {
        to_rgba(self.batch.targets())
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

fn to_rgba(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .flat_map(|v| {
            let g = (((v.clamp(-1.0, 1.0) + 1.0) * 0.5) * 255.0).round() as u8;
            [g, g, g, 255]
        })
        .collect()
}

/// For `points` evenly spaced coefficients in [0, 1], the measured loss
/// change after one outer step and its first-order prediction
/// `-lambda_o (1 - gamma) |g_K|^2`. Returned flat as `[gamma, measured, predicted]`
/// triples.
#[wasm_bindgen]
pub fn gamma_sweep(lambda_i: f64, lambda_o: f64, points: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let problem = ToyProblem::random_tiny_siren(2, 32, 30.0, lambda_i, seed).map_err(js_err)?;
    let points = points.max(2);
    let mut out = Vec::with_capacity(points * 3);
    for i in 0..points {
        let gamma = i as f64 / (points - 1) as f64;
        let (dl, gk_sq) = loss_change(&problem, MetaStrategy::Fedmenf, lambda_o, gamma).map_err(js_err)?;
        out.extend([gamma, dl, -lambda_o * (1.0 - gamma) * gk_sq]);
    }
    Ok(out)
}

/// Tasks per client from a Dirichlet(alpha) draw.
#[wasm_bindgen]
pub fn dirichlet_counts(n_clients: usize, alpha: f64, total_items: usize, seed: u64) -> Result<Vec<u32>, JsError> {
    let counts = dirichlet_partition(&PartitionSpec { n_clients, alpha, total_items, seed }).map_err(js_err)?;
    Ok(counts.into_iter().map(|c| c as u32).collect())
}
