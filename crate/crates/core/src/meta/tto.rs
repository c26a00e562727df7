use serde::{Deserialize, Serialize};

use crate::data::TaskData;
use crate::metrics::privacy_metrics;
use crate::nn::{loss_and_grad, optimizer_step, Architecture, OptimizerKind, OptimizerState, ParamVector};
use crate::{Error, Result};

/// Test-time optimization settings: full-batch steps on the support set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtoSettings {
    pub lr: f64,
    pub optimizer: OptimizerKind,
}

impl Default for TtoSettings {
    fn default() -> Self {
        Self { lr: 1e-3, optimizer: OptimizerKind::Adamw }
    }
}

/// Query metrics after `step` optimization steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtoPoint {
    pub step: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Adapt `theta` to `task` and record query PSNR/SSIM at every step in
/// `schedule` (strictly increasing; step 0 is the unadapted parameters).
pub fn tto_curve(
    theta: &ParamVector,
    arch: &Architecture,
    task: &TaskData,
    schedule: &[usize],
    settings: &TtoSettings,
) -> Result<Vec<TtoPoint>> {
    if schedule.is_empty() {
        return Err(Error::arg("tto_steps", "schedule is empty"));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("tto_steps", "schedule must be strictly increasing"));
    }
    if !(settings.lr.is_finite() && settings.lr >= 0.0) {
        return Err(Error::arg("tto_lr", format!("must be finite and >= 0, got {}", settings.lr)));
    }
    theta.check_len("theta", arch.param_count())?;

    let mut opt = OptimizerState::for_kind(settings.optimizer, theta.len()).with_weight_decay(0.0);
    let mut phi = theta.clone();
    let mut done = 0;
    let mut out = Vec::with_capacity(schedule.len());
    for &step in schedule {
        while done < step {
            let (_, g) = loss_and_grad(&phi, arch, &task.support)?;
            let (next, state) = optimizer_step(&opt, &phi, &g, settings.lr);
            phi = next;
            opt = state;
            done += 1;
        }
        let (psnr, ssim) = privacy_metrics(&phi, arch, &task.query, &task.dims)?;
        out.push(TtoPoint { step, psnr, ssim });
    }
    Ok(out)
}
