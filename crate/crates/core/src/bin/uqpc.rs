use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use uqpc::experiments::{self, StudyConfig};
use uqpc::UqError;

#[derive(Parser)]
#[command(name = "uqpc", version, about = "Polynomial chaos surrogates from noisy Monte Carlo transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a config file and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `outputs` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Print the exact statistics of the configured problem as JSON.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Total degree for the quadrature coefficients (overrides `pce.n0`).
        #[arg(long)]
        n0: Option<u32>,
    },
}

fn load(path: &std::path::Path) -> Result<StudyConfig, UqError> {
    StudyConfig::from_path(path)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            workers,
            repetitions,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            cfg.workers = workers;
            cfg.validate()?;
            let out = out
                .or_else(|| cfg.outputs.clone())
                .ok_or_else(|| UqError::Config("no output directory (use --out)".into()))?;
            let report = experiments::run_study(&cfg)?;
            report
                .write_to(&out)
                .with_context(|| format!("writing reports to {}", out.display()))?;
            eprintln!("wrote {:?} study to {}", cfg.kind, out.display());
        }
        Command::Oracle { config, n0 } => {
            let mut cfg = load(&config)?;
            if let Some(n) = n0 {
                cfg.n0 = n;
            }
            let summary = experiments::oracle_summary(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<UqError>() {
                Some(UqError::Config(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
