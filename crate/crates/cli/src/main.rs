//! `finsum`: run, sweep and validate experiment configurations.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use finsum_core::harness::{run_experiment, sweep, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "finsum", version, about = "Finite-sum optimization experiments with query accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV.
    Run(Common),
    /// Run every cell of the configuration's grid.
    Sweep(Common),
    /// Validate a configuration and print its hash.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, env = "FINSUM_CONFIG")]
    config: Option<PathBuf>,
    /// Experiment kind with default parameters, when no config is given.
    #[arg(long, conflicts_with = "config")]
    experiment: Option<String>,
    /// Master seed; overrides the config and FINSUM_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when absent and the config names none.
    #[arg(long, env = "FINSUM_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, env = "FINSUM_JOBS", default_value_t = 0)]
    jobs: usize,
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.experiment) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(name)) => ExperimentConfig::new(name.parse::<ExperimentKind>()?, 0),
        (None, None) => bail!("either --config or --experiment is required"),
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(c: &Common, cfg: &ExperimentConfig, csv: &str) -> Result<()> {
    match c.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)) {
        Some(path) => {
            std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            log::info!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let cfg = load(&c)?;
            if cfg.cell_count() > 1 {
                bail!("configuration has a {}-cell grid; use `sweep`", cfg.cell_count());
            }
            let mut single = cfg.clone();
            single.params = cfg.cell(0).0;
            let csv = run_experiment(&single)?;
            emit(&c, &cfg, &csv)
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let csv = sweep(&cfg, c.jobs)?;
            emit(&c, &cfg, &csv)
        }
        Command::Check(c) => {
            let cfg = load(&c)?;
            println!(
                "ok experiment={} config_hash={} seed={} repetitions={} cells={}",
                cfg.kind.name(),
                cfg.config_hash(),
                cfg.seed,
                cfg.repetitions,
                cfg.cell_count()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
