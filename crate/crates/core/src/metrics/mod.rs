//! Reconstruction quality and privacy-leakage metrics.
//!
//! Signals live in `[-1, 1]`; both PSNR and SSIM rescale to `[0, 1]` first,
//! so the PSNR peak is 1 and zero error is capped at [`PSNR_CAP`] dB.

mod privacy;
mod quality;

pub use privacy::{budget_check, privacy_metrics, BudgetReport, MetricReport};
pub use quality::{masked_ssim, psnr, ssim, PSNR_CAP, SSIM_C1, SSIM_C2, SSIM_WINDOW};
