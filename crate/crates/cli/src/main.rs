//! Command-line entry point.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 for
//! numerical failures, 1 for anything else (I/O, …).

use clap::{Parser, Subcommand};
use fixiter_cli::builtin;
use fixiter_cli::config::ExperimentConfig;
use fixiter_cli::runner::{self, RunError};
use std::path::PathBuf;

/// Environment variable overriding the default output directory.
const OUT_DIR_ENV: &str = "FIXITER_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "fixiter",
    about = "Fixed-point iteration experiments with convergence-rate diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a built-in name.
    Run {
        /// Path to a TOML config, or one of the names shown by `list`.
        config: String,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's iteration horizon.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Output directory (default: ./out/<name>, or $FIXITER_OUT_DIR/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in experiments.
    List,
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
}

fn load_config(spec: &str) -> Result<ExperimentConfig, RunError> {
    let text = match builtin::builtin(spec) {
        Some(text) => text,
        None => {
            let path = PathBuf::from(spec);
            if !path.exists() {
                let names = builtin::NAMES.join(", ");
                return Err(RunError::Setup(format!(
                    "'{spec}' is neither a config file nor a built-in name; built-ins: {names}"
                )));
            }
            std::fs::read_to_string(&path)?
        }
    };
    Ok(ExperimentConfig::parse(&text)?)
}

fn resolve_out_dir(explicit: Option<PathBuf>, name: &str) -> PathBuf {
    if let Some(dir) = explicit {
        return dir;
    }
    let base = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"));
    base.join(name)
}

fn real_main() -> Result<(), RunError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            max_iters,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(n) = max_iters {
                cfg.run.max_iters = n;
            }
            let out_dir = resolve_out_dir(out, &cfg.name);
            let summary = runner::run_experiment(&cfg, &out_dir)?;
            println!(
                "{}: {} member(s), {} steps max, artifacts in {}",
                summary.name,
                summary.ensemble_count,
                summary
                    .members
                    .iter()
                    .map(|m| m.steps)
                    .max()
                    .unwrap_or(0),
                out_dir.display()
            );
            Ok(())
        }
        Command::List => {
            for name in builtin::NAMES {
                println!("{name:28} {}", builtin::description(name));
            }
            Ok(())
        }
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::parse(&text)?;
            cfg.build_problem()?;
            println!("{}: ok", cfg.name);
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
