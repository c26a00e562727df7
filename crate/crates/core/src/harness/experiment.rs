use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::checkpoint::{config_hash, save_checkpoint};
use super::ExperimentConfig;
use crate::data::{dirichlet_partition, gen_task_signal, split_support_query, PartitionSpec, TaskData};
use crate::meta::{tto_curve, ClientState, TtoSettings};
use crate::nn::{siren_init, Architecture, ParamVector};
use crate::rng::derive_seed;
use crate::server::{run_training, ClientRoundLog, RoundLog, TrainingOutcome, TrainingSetup};
use crate::{Error, Result};

const SEED_POPULATION: u64 = 10;
const SEED_PARTITION: u64 = 11;
const SEED_SPLIT: u64 = 12;
const SEED_INIT: u64 = 13;
/// Held-out tasks come from client identities never used in training.
const TEST_CLIENT_OFFSET: u64 = 1 << 32;

/// Clients and held-out tasks generated from a config.
#[derive(Debug, Clone)]
pub struct Federation {
    pub arch: Architecture,
    pub clients: Vec<ClientState>,
    pub test_tasks: Vec<TaskData>,
}

/// Per-client task counts from the Dirichlet partition.
pub fn partition_counts(cfg: &ExperimentConfig) -> Result<Vec<usize>> {
    dirichlet_partition(&PartitionSpec {
        n_clients: cfg.data.n_clients,
        alpha: cfg.data.dirichlet_alpha,
        total_items: cfg.data.tasks,
        seed: derive_seed(cfg.seed, &[SEED_PARTITION]),
    })
}

fn make_task(cfg: &ExperimentConfig, client: u64, task: u64) -> Result<TaskData> {
    let d = &cfg.data;
    let population = derive_seed(cfg.seed, &[SEED_POPULATION]);
    let sig = gen_task_signal(d.kind, &d.dims, d.channels, population, client, task)?;
    let mut t = split_support_query(&sig, d.support_fraction, derive_seed(cfg.seed, &[SEED_SPLIT, client, task]))?;
    t.task_id = format!("c{client}t{task}");
    Ok(t)
}

pub fn build_federation(cfg: &ExperimentConfig) -> Result<Federation> {
    cfg.validate()?;
    let arch = cfg.architecture()?;
    let counts = partition_counts(cfg)?;
    let clients = counts
        .iter()
        .enumerate()
        .map(|(id, &n)| {
            let tasks = (0..n as u64).map(|t| make_task(cfg, id as u64, t)).collect::<Result<Vec<_>>>()?;
            Ok(ClientState { id, weight: tasks.len() as f64, tasks })
        })
        .collect::<Result<_>>()?;
    let test_tasks = (0..cfg.data.test_tasks as u64)
        .map(|t| make_task(cfg, TEST_CLIENT_OFFSET + t, 0))
        .collect::<Result<_>>()?;
    Ok(Federation { arch, clients, test_tasks })
}

/// The shared initialization every run starts from.
pub fn initial_params(cfg: &ExperimentConfig, arch: &Architecture) -> ParamVector {
    siren_init(arch, derive_seed(cfg.seed, &[SEED_INIT]))
}

pub fn training_setup(cfg: &ExperimentConfig, fed: &Federation) -> TrainingSetup {
    TrainingSetup {
        arch: fed.arch.clone(),
        theta0: initial_params(cfg, &fed.arch),
        clients: fed.clients.clone(),
        test_tasks: fed.test_tasks.clone(),
        meta: cfg.meta_hyper(),
        strategy: cfg.federation.strategy,
        hyper: cfg.server_hyper(),
        rounds: cfg.federation.rounds,
        participants: cfg.federation.participants,
        seed: cfg.seed,
        eval: cfg.eval_settings(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub const ROUNDS_HEADER: &str = "round,client_id,psnr,psnr_p,ssim,ssim_p,delta,gamma,consumed_budget";

/// Round summaries, one row per round with `client_id = all`.
pub fn rounds_csv(rounds: &[RoundLog]) -> String {
    let mut s = format!("{ROUNDS_HEADER}\n");
    for r in rounds {
        let _ = writeln!(
            s,
            "{},all,{},{},{},{},{},{},{}",
            r.round,
            opt(r.psnr),
            r.psnr_p,
            opt(r.ssim),
            r.ssim_p,
            opt(r.delta()),
            r.gamma,
            r.consumed_budget
        );
    }
    s
}

/// Per-participant rows in the same schema; held-out columns stay empty.
pub fn clients_csv(clients: &[ClientRoundLog], rounds: &[RoundLog]) -> String {
    let mut s = format!("{ROUNDS_HEADER}\n");
    for c in clients {
        let _ = writeln!(
            s,
            "{},{},,{},,{},,{},{}",
            c.round, c.client_id, c.psnr_p, c.ssim_p, c.gamma, rounds[c.round].consumed_budget
        );
    }
    s
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentArtifacts {
    pub outcome: TrainingOutcome,
    pub rounds_csv: PathBuf,
    pub clients_csv: PathBuf,
    pub checkpoint: PathBuf,
    pub config_echo: PathBuf,
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Train and write `rounds.csv`, `clients.csv`, `checkpoint.fmnf` (+ header)
/// and `config.toml` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentArtifacts> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let fed = build_federation(cfg)?;
    let setup = training_setup(cfg, &fed);
    let outcome = run_training(&setup)?;

    let echo = cfg.to_toml_string();
    let config_echo = write(out.join("config.toml"), &echo)?;
    let rounds_csv = write(out.join("rounds.csv"), rounds_csv(&outcome.rounds))?;
    let clients_csv = write(out.join("clients.csv"), clients_csv(&outcome.clients, &outcome.rounds))?;
    let checkpoint = out.join("checkpoint.fmnf");
    save_checkpoint(outcome.theta(), &fed.arch, &config_hash(&echo), &checkpoint)?;
    Ok(ExperimentArtifacts { outcome, rounds_csv, clients_csv, checkpoint, config_echo })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtoRow {
    pub task: usize,
    pub step: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Query metrics of every test task at every scheduled TTO step.
#[derive(Debug, Clone, PartialEq)]
pub struct TtoTable {
    pub schedule: Vec<usize>,
    pub rows: Vec<TtoRow>,
}

impl TtoTable {
    /// Mean `(psnr, ssim)` over tasks at `step`, if scheduled.
    pub fn mean_at(&self, step: usize) -> Option<(f64, f64)> {
        let sel: Vec<&TtoRow> = self.rows.iter().filter(|r| r.step == step).collect();
        if sel.is_empty() {
            return None;
        }
        let n = sel.len() as f64;
        Some((sel.iter().map(|r| r.psnr).sum::<f64>() / n, sel.iter().map(|r| r.ssim).sum::<f64>() / n))
    }

    /// `(step, mean psnr)` for every scheduled step.
    pub fn mean_curve(&self) -> Vec<(usize, f64)> {
        self.schedule.iter().map(|&s| (s, self.mean_at(s).expect("scheduled").0)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,step,psnr,ssim\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.task, r.step, r.psnr, r.ssim);
        }
        s
    }
}

/// Test-time optimization of `theta` on every task, recording query metrics
/// at each step of `schedule` (which may include 0, the raw parameters).
pub fn tto_evaluate(
    theta: &ParamVector,
    arch: &Architecture,
    test_tasks: &[TaskData],
    schedule: &[usize],
    settings: &TtoSettings,
    max_steps: usize,
) -> Result<TtoTable> {
    if let Some(&s) = schedule.iter().find(|&&s| s > max_steps) {
        return Err(Error::arg("tto_steps", format!("step {s} exceeds the configured maximum {max_steps}")));
    }
    if test_tasks.is_empty() {
        return Err(Error::Empty("no test tasks".into()));
    }
    let run = |(i, t): (usize, &TaskData)| -> Result<Vec<TtoRow>> {
        Ok(tto_curve(theta, arch, t, schedule, settings)?
            .into_iter()
            .map(|p| TtoRow { task: i, step: p.step, psnr: p.psnr, ssim: p.ssim })
            .collect())
    };
    #[cfg(feature = "parallel")]
    let per_task: Vec<Vec<TtoRow>> = {
        use rayon::prelude::*;
        test_tasks.par_iter().enumerate().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_task: Vec<Vec<TtoRow>> = test_tasks.iter().enumerate().map(run).collect::<Result<_>>()?;
    Ok(TtoTable { schedule: schedule.to_vec(), rows: per_task.into_iter().flatten().collect() })
}

/// Run `f` on a pool of `threads` workers (0 = library default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::arg("threads", e.to_string()))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}
