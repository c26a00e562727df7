//! Client-side local meta-optimization.
//!
//! The numerical core works on any [`Objective`](crate::nn::Objective)
//! schedule (one objective per inner step plus a query objective), so the
//! same code runs on neural-field minibatches and on closed-form toys.

mod gamma;
mod hyper;
mod inner;
mod local;
mod outer;
mod tto;

pub use gamma::adaptive_gamma;
pub use hyper::{GammaMode, MetaGradMode, MetaHyperparams, MetaStrategy, NsgdParams};
pub use inner::{
    inner_loop, inner_loop_obj, inner_product_term, inner_product_term_obj, meta_grad_exact, meta_grad_exact_obj,
    InnerTrace,
};
pub use local::{local_update, ClientState, FederationContext, LocalUpdateResult};
pub use outer::{outer_step, outer_step_obj, OuterDiagnostics};
pub use tto::{tto_curve, TtoPoint, TtoSettings};
