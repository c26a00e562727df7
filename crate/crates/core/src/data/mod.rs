//! Signals, coordinate grids, non-IID partitioning and task splits.

mod grid;
mod image;
mod partition;
mod signal;
mod task;

pub use grid::{coord_grid, grid_index};
pub use image::{load_image, parse_pnm, save_image, write_pnm};
pub use partition::{dirichlet_partition, partition_csv, PartitionSpec};
pub use signal::{gen_synthetic_signal, gen_task_signal, Signal, SignalKind};
pub use task::{sample_minibatch, split_support_query, TaskData};
