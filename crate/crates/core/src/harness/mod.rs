//! Experiment configuration, orchestration, test-time evaluation and
//! checkpoint files.

mod checkpoint;
mod config;
mod experiment;

pub use checkpoint::{config_hash, header_path, load_checkpoint, save_checkpoint, CheckpointHeader};
pub use config::{
    parse_config, write_config, ArchConfig, DataConfig, EvalConfig, ExperimentConfig, FederationConfig, GammaModeName,
    MetaConfig, OutputConfig,
};
pub use experiment::{
    build_federation, clients_csv, initial_params, partition_counts, rounds_csv, run_experiment, training_setup,
    tto_evaluate, with_threads, ExperimentArtifacts, Federation, TtoRow, TtoTable, ROUNDS_HEADER,
};
