//! Dense sinusoidal MLP engine.
//!
//! Parameters live in a single flat [`ParamVector`] with a canonical layout
//! (per layer: weights row-major, then biases). Gradients and Hessian-vector
//! products are computed exactly by hand-written reverse mode and
//! forward-over-reverse passes.

mod arch;
pub mod checkpoint;
mod engine;
mod init;
mod objective;
mod optim;
mod params;

pub use arch::{Activation, Architecture, LayerShape};
pub use engine::{forward, grad, hvp, loss_and_grad, loss_mse};
pub use init::siren_init;
pub use objective::{MseObjective, Objective, Quadratic};
pub use optim::{clip_grad_norm, optimizer_step, OptimizerKind, OptimizerState};
pub use params::{Batch, ParamVector};
