//! Server side: client sampling, aggregation rules and the round loop.

mod aggregate;
mod modifier;
mod training;

pub use aggregate::{aggregate, broadcast, sample_clients, ClientUpdate, ServerHyper, ServerState, ServerStrategy};
pub use modifier::{local_loss_modifier, scaffold_control_update, LocalModifier};
pub use training::{client_rng, run_training, ClientRoundLog, EvalSettings, RoundLog, TrainingOutcome, TrainingSetup};
