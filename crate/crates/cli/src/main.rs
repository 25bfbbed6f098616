use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use splitlab::reproduce::{reproduce_all, DEFAULT_SEED};
use splitlab::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "splitlab", version, about = "Single-split test experiments")]
struct Cli {
    /// Worker threads for Monte Carlo loops.
    #[arg(long, env = "SPLITLAB_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Run every acceptance criterion and print pass/fail lines.
    ReproduceAll {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "out/reproduce")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set worker count: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, seed, out, quiet } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = cfg.out_dir.clone().filter(|_| out == PathBuf::from("out")).unwrap_or(out);
            splitlab::experiments::run(&cfg, &out, quiet)?;
            Ok(())
        }
        Command::ReproduceAll { seed, out, quiet } => {
            let report = reproduce_all(seed, &out, quiet)?;
            let failing = report.failing();
            if failing.is_empty() {
                Ok(())
            } else {
                Err(CliError::Criteria(failing))
            }
        }
    }
}
