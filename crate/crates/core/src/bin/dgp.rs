use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dgp::experiment::{run, ExperimentConfig, Mode, Overrides};

/// Dynamic Gaussian process estimation experiments.
#[derive(Debug, Parser)]
#[command(name = "dgp", version)]
struct Cli {
    #[command(subcommand)]
    mode: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the ground truth and write truth.csv and observations.csv.
    Simulate(Args),
    /// Run the separable estimator with the first configured basis size.
    Estimate(Args),
    /// Run the estimator for every configured basis size and write errors.csv.
    Sweep(Args),
    /// Check the estimators against batch GP regression and the Kalman filter.
    ReduceCheck(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sets the disturbance covariance to zero.
    #[arg(long)]
    no_disturbance: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.mode {
        Command::Simulate(a) => (Mode::Simulate, a),
        Command::Estimate(a) => (Mode::Estimate, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::ReduceCheck(a) => (Mode::ReduceCheck, a),
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        no_disturbance: args.no_disturbance,
    };
    let result = ExperimentConfig::load(&args.config).and_then(|cfg| run(mode, cfg, &overrides));
    match result {
        Ok(summary) => {
            if let Some(report) = &summary.report {
                print!("{report}");
            }
            for f in &summary.files {
                eprintln!("wrote {}", f.display());
            }
            if summary.checks_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(2)
        }
    }
}
