use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use flexphase::cli::{self, Experiment, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Contrastive-learning experiment runner: flexible phase dynamics for
/// energy-based and Forward-Forward models.
#[derive(Parser)]
#[command(name = "flexphase", version, about)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an RBM on Bars-And-Stripes under a phase schedule.
    TrainRbm(Common),
    /// Train a Forward-Forward classifier on a digit corpus.
    TrainFf(Common),
    /// Scan the estimator variance trace over the phase probability b.
    VarianceScan(Common),
    /// Measure always-on learning bias on toy systems across learning rates.
    BiasScan(Common),
    /// Learning-rate line search for the RBM experiment.
    LineSearch(Common),
    /// Print the Bars-And-Stripes ideal-model NLL floor.
    BasNllOracle(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// RNG seed; overrides the config key.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; overrides the config key and $FLEXPHASE_OUT.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn build_config(experiment: Experiment, common: &Common) -> Result<RunConfig> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = cli::parse_config(&text, experiment).map_err(|e| anyhow!("{e}"))?;
    cfg.experiment = experiment;
    for kv in &common.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        cli::set_key(&mut cfg, key.trim(), value.trim(), 0).map_err(|e| anyhow!("{e}"))?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = CliArgs::parse();
    let (experiment, common) = match &args.command {
        Command::TrainRbm(c) => (Experiment::TrainRbm, c),
        Command::TrainFf(c) => (Experiment::TrainFf, c),
        Command::VarianceScan(c) => (Experiment::VarianceScan, c),
        Command::BiasScan(c) => (Experiment::BiasScan, c),
        Command::LineSearch(c) => (Experiment::LineSearch, c),
        Command::BasNllOracle(c) => (Experiment::BasNllOracle, c),
    };
    let cfg = match build_config(experiment, common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    match cli::run(&cfg) {
        Ok(output) => {
            for line in &output.summary {
                println!("{line}");
            }
            for file in &output.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
