use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pullback_lattice::config::parse_config;
use pullback_lattice::runner::run_experiment;

#[derive(Parser)]
#[command(name = "pullback-lattice", version, about = "Pullback attractors of stochastic lattice systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `noise.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Run { config, seed, out_dir } = Cli::parse().command;
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = seed {
        cfg.noise.seed = seed;
    }
    if let Some(dir) = out_dir {
        cfg.output_dir = dir;
    }
    match run_experiment(&cfg) {
        Ok(outcome) => {
            for check in &outcome.checks {
                println!("{}", check.line());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
