//! Numerical checks of the first-order meta-learning approximations on
//! controlled toy problems: meta-gradient error scaling, one-step loss
//! change under MAML, and its suppression by the γ-weighted correction.

mod report;
mod toy;
mod verify;

pub use report::ScalingReport;
pub use toy::{ToyKind, ToyProblem};
pub use verify::{loss_change, prop2_sign_fraction, verify_prop1, verify_prop2, verify_prop3, Thresholds};
