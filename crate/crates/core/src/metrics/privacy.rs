use serde::{Deserialize, Serialize};

use super::{masked_ssim, psnr};
use crate::data::grid_index;
use crate::nn::{forward, Architecture, Batch, ParamVector};
use crate::{Error, Result};

/// Reconstruction and privacy metrics of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub psnr_p: f64,
    pub ssim_p: f64,
}

impl MetricReport {
    /// `PSNR - PSNR_p`.
    pub fn delta_psnr(&self) -> f64 {
        self.psnr - self.psnr_p
    }
}

/// How well the shared parameters `w` reproduce a private query set:
/// `(PSNR_p, SSIM_p)` of `f_w(Coord(Q))` against `Q`'s values.
///
/// SSIM_p places the query samples on their grid (`dims`) and evaluates
/// windows over the query points only.
pub fn privacy_metrics(w: &ParamVector, arch: &Architecture, query: &Batch, dims: &[usize]) -> Result<(f64, f64)> {
    if query.coord_dim() != dims.len() {
        return Err(Error::ShapeMismatch {
            what: "query coordinate dim vs dims",
            expected: dims.len(),
            got: query.coord_dim(),
        });
    }
    let pred = forward(w, arch, query.coords())?;
    let psnr_p = psnr(&pred, query.targets())?;

    let n: usize = dims.iter().product();
    let c = query.value_dim();
    let mut mask = vec![false; n];
    let mut full_pred = vec![0.0; n * c];
    let mut full_target = vec![0.0; n * c];
    for i in 0..query.len() {
        let idx = grid_index(query.coord(i), dims).ok_or_else(|| {
            Error::arg("dims", format!("query coordinate {i} is not on the {dims:?} grid"))
        })?;
        mask[idx] = true;
        full_pred[idx * c..(idx + 1) * c].copy_from_slice(&pred[i * c..(i + 1) * c]);
        full_target[idx * c..(idx + 1) * c].copy_from_slice(query.target(i));
    }
    let ssim_p = masked_ssim(&full_pred, &full_target, dims, c, &mask)?;
    Ok((psnr_p, ssim_p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    pub consumed: f64,
    pub within: bool,
}

/// `mean|dL| * R * E * M / N` against the privacy budget `zeta`.
pub fn budget_check<'a>(
    delta_l: impl IntoIterator<Item = &'a f64>,
    rounds: usize,
    outer_steps: usize,
    participants: usize,
    n_clients: usize,
    zeta: f64,
) -> BudgetReport {
    let (sum, count) = delta_l.into_iter().fold((0.0, 0usize), |(s, c), d| (s + d.abs(), c + 1));
    let mean = if count == 0 { 0.0 } else { sum / count as f64 };
    let consumed = mean * rounds as f64 * outer_steps as f64 * participants as f64 / n_clients.max(1) as f64;
    BudgetReport {
        consumed,
        within: consumed <= zeta,
    }
}
