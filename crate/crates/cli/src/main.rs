use clap::{Parser, Subcommand};
use gkg_cli::config::ExperimentConfig;
use gkg_cli::{init_workers, nist_run, sweep};
use gkg_core::error::GkgError;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_FAILURE_RATE: u8 = 3;

#[derive(Parser)]
#[command(name = "gkg", about = "RIS-assisted group key generation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write CSV tables and plot descriptions.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate key bits through the pipeline and run the randomness suite.
    Nist {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract the minimum power reaching KER <= 0.1 per (mode, L).
    Table1 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, GkgError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GkgError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, out, workers, seed) = match &cli.command {
        Command::Run { config, out, workers, seed }
        | Command::Nist { config, out, workers, seed }
        | Command::Table1 { config, out, workers, seed } => {
            (config.clone(), out.clone(), *workers, *seed)
        }
    };
    if let Err(e) = init_workers(workers) {
        eprintln!("worker pool: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let cfg = match load_config(&config, seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let run = || -> Result<u8, GkgError> {
        match &cli.command {
            Command::Run { .. } => {
                let result = sweep::run_sweep(&cfg)?;
                sweep::emit_outputs(&cfg, &result, &out)?;
                let rate = result.max_failure_rate();
                if rate > cfg.failure_threshold {
                    eprintln!(
                        "solver failure rate {rate:.3} exceeds threshold {:.3}",
                        cfg.failure_threshold
                    );
                    return Ok(EXIT_FAILURE_RATE);
                }
                println!("wrote {}", out.join("sweep.csv").display());
                Ok(0)
            }
            Command::Nist { .. } => {
                let outcomes = nist_run::nist_campaign(&cfg, &out)?;
                for o in &outcomes {
                    println!("{}", o.report.table());
                }
                Ok(0)
            }
            Command::Table1 { .. } => {
                let csv = sweep::table1(&cfg, &out)?;
                println!("{csv}");
                Ok(0)
            }
        }
    };
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e @ GkgError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
