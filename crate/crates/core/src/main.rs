use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pamham::config::{validate_config, RunConfig};
use pamham::runner::{configure_workers, run_experiment, summarize_report};

#[derive(Parser)]
#[command(name = "pamham", version, about = "Chaos-expansion experiments for Anderson models with colored noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a run configuration against the standing hypotheses.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute the configured experiment and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the base seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = library default).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Output directory (overrides the config's run.out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a previously written report directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> pamham::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let report = validate_config(&cfg);
            for w in &report.warnings {
                println!("warning: {w}");
            }
            if report.ok() {
                println!(
                    "ok: hypotheses satisfied (Dalang integral ~ {:.4e}); largest tensor {:.2e} bytes",
                    report.dalang.integral_estimate, report.tensor_bytes_estimate
                );
                Ok(true)
            } else {
                for e in &report.errors {
                    println!("error: {e}");
                }
                Ok(false)
            }
        }
        Command::Run { config, seed, workers, out } => {
            configure_workers(workers);
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            let out_dir = out
                .or_else(|| cfg.run.out_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs/latest"));
            let outcome = run_experiment(&cfg, &out_dir)?;
            println!(
                "report: {} ({})",
                outcome.report_path.display(),
                if outcome.pass { "pass" } else { "FAIL" }
            );
            Ok(outcome.pass)
        }
        Command::Report { out } => {
            print!("{}", summarize_report(&out)?);
            Ok(true)
        }
    }
}
