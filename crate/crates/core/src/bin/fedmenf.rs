//! Command-line front end: training runs, test-time evaluation, numerical
//! proposition checks, partition dumps and metric comparisons.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedmenf::data::{coord_grid, load_image, partition_csv};
use fedmenf::harness::{
    build_federation, initial_params, load_checkpoint, parse_config, partition_counts, run_experiment, tto_evaluate,
    with_threads, ExperimentConfig,
};
use fedmenf::metrics::{psnr, ssim};
use fedmenf::nn::forward;
use fedmenf::theory::{verify_prop1, verify_prop2, verify_prop3, ScalingReport, Thresholds, ToyProblem};
use fedmenf::Error;

#[derive(Parser)]
#[command(name = "fedmenf", version, about = "Federated meta-learning of neural fields")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run federated training and write rounds.csv, clients.csv, the
    /// checkpoint and a config echo.
    Train,
    /// Test-time optimization curves on held-out tasks.
    Tto {
        /// Checkpoint to start from (default: <out>/checkpoint.fmnf).
        #[arg(long, conflicts_with = "random_init")]
        checkpoint: Option<PathBuf>,
        /// Start from a fresh initialization instead (the no-federation
        /// baseline).
        #[arg(long)]
        random_init: bool,
    },
    /// Check the first-order meta-learning propositions on toy problems.
    VerifyProps,
    /// Print the Dirichlet task counts per client.
    Partition,
    /// Compare two images, or two checkpoints rendered on the config grid.
    Metrics { a: PathBuf, b: PathBuf },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => parse_config(p).map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(Error::Io { path: dir.into(), source: e }))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Runtime(Error::Io { path: path.into(), source: e }))
}

fn train(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let art = run_experiment(cfg, &cfg.output.dir)?;
    let last = art.outcome.rounds.iter().rev().find(|r| r.psnr.is_some());
    println!("wrote {}", art.rounds_csv.display());
    println!("wrote {}", art.checkpoint.display());
    if let Some(r) = last {
        println!(
            "round {}: psnr {:.2} dB, psnr_p {:.2} dB, budget {:.4}",
            r.round,
            r.psnr.unwrap_or(f64::NAN),
            r.psnr_p,
            r.consumed_budget
        );
    }
    Ok(())
}

fn tto(cfg: &ExperimentConfig, checkpoint: Option<PathBuf>, random_init: bool) -> Result<(), Failure> {
    let fed = build_federation(cfg)?;
    let (theta, arch) = if random_init {
        (initial_params(cfg, &fed.arch), fed.arch.clone())
    } else {
        let path = checkpoint.unwrap_or_else(|| cfg.output.dir.join("checkpoint.fmnf"));
        let (theta, arch, _) = load_checkpoint(&path)?;
        if arch != fed.arch {
            return Err(Failure::Config(Error::Config {
                key: "arch".into(),
                reason: format!("checkpoint has layers {:?}, config describes {:?}", arch.layer_dims(), fed.arch.layer_dims()),
            }));
        }
        (theta, arch)
    };
    let table = tto_evaluate(
        &theta,
        &arch,
        &fed.test_tasks,
        &cfg.eval.tto_steps,
        &cfg.tto_settings(),
        cfg.eval.max_tto_steps,
    )?;
    let path = cfg.output.dir.join(if random_init { "tto_random_init.csv" } else { "tto.csv" });
    write(&path, &table.to_csv())?;
    println!("step,mean_psnr");
    for (s, p) in table.mean_curve() {
        println!("{s},{p:.3}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn verify_props(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let th = Thresholds::default();
    let gammas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let quad = |lambda_i| ToyProblem::random_quadratic(6, 2, 0.1, lambda_i, cfg.seed);
    let siren = |lambda_i| ToyProblem::random_tiny_siren(2, 16, 30.0, lambda_i, cfg.seed);
    let reports: Vec<(&str, ScalingReport)> = vec![
        ("quadratic", verify_prop1(&quad(0.0)?, &[4e-2, 2e-2, 1e-2, 5e-3], &th)?),
        ("tiny_siren", verify_prop1(&siren(0.0)?, &[1e-2, 5e-3, 2.5e-3], &th)?),
        ("quadratic", verify_prop2(&quad(1e-4)?, &[1e-2, 1e-3, 1e-4], &th)?),
        ("tiny_siren", verify_prop2(&siren(1e-4)?, &[1e-2, 1e-3, 1e-4], &th)?),
        ("quadratic", verify_prop3(&quad(1e-4)?, &gammas, 1e-4, &th)?),
        ("tiny_siren", verify_prop3(&siren(1e-4)?, &gammas, 1e-4, &th)?),
    ];
    let mut all = true;
    for (toy, r) in &reports {
        print!("[{toy}] {r}");
        all &= r.pass;
        write(&cfg.output.dir.join(format!("prop{}_{toy}.csv", r.proposition)), &r.to_csv())?;
    }
    if all {
        Ok(())
    } else {
        Err(Failure::Runtime(Error::InvalidArgument {
            name: "verify-props",
            reason: "at least one proposition check failed".into(),
        }))
    }
}

fn render(path: &Path, cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<usize>, usize), Failure> {
    if path.extension().is_some_and(|e| e == "fmnf") {
        let (theta, arch, _) = load_checkpoint(path)?;
        let dims = cfg.data.dims.clone();
        let coords = coord_grid(&dims)?;
        let values = forward(&theta, &arch, &coords)?;
        Ok((values, dims, arch.output_dim()))
    } else {
        let s = load_image(path)?;
        Ok((s.values().to_vec(), s.dims().to_vec(), s.channels()))
    }
}

fn metrics(cfg: &ExperimentConfig, a: &Path, b: &Path) -> Result<(), Failure> {
    let (va, da, ca) = render(a, cfg)?;
    let (vb, db, cb) = render(b, cfg)?;
    if da != db || ca != cb {
        return Err(Failure::Runtime(Error::InvalidArgument {
            name: "metrics",
            reason: format!("shapes differ: {da:?}x{ca} vs {db:?}x{cb}"),
        }));
    }
    println!("psnr,ssim");
    println!("{},{}", psnr(&va, &vb)?, ssim(&va, &vb, &da, ca)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    let threads = cli.common.threads;
    let result = with_threads(threads, move || match cli.command {
        Command::Train => train(&cfg),
        Command::Tto { checkpoint, random_init } => tto(&cfg, checkpoint, random_init),
        Command::VerifyProps => verify_props(&cfg),
        Command::Partition => {
            let counts = partition_counts(&cfg)?;
            let csv = partition_csv(&counts);
            print!("{csv}");
            if cli.common.out.is_some() {
                write(&cfg.output.dir.join("partition.csv"), &csv)?;
            }
            Ok(())
        }
        Command::Metrics { a, b } => metrics(&cfg, &a, &b),
    });
    result?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
