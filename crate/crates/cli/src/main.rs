mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use reach_avoid::neural::NeuralError;

use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "reach-avoid", version, about = "Reach-avoid value functions: solve, train, certify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver and write artifacts.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify an artifact: confusion reports, masks, nesting and exhaustive checks.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated discount factors for the nesting report.
        #[arg(long, value_delimiter = ',')]
        gamma_ladder: Option<Vec<f64>>,
    },
    /// Write a two-dimensional slice as CSV plus a zero-level contour.
    ExportGrid {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// One entry per dimension: `*` for free axes, a coordinate for fixed ones.
        #[arg(long, default_value = "")]
        slice: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the artifact's greedy policy from one state.
    Rollout {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        /// Comma-separated start state.
        #[arg(long, allow_hyphen_values = true)]
        state: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate defender plans against a network attacker from one state.
    ValidateExhaustive {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        state: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    ExperimentConfig::resolve(&text, seed)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

fn artifact_dir(artifact: &Path) -> PathBuf {
    artifact.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let out = commands::out_dir(out, Some(&cfg), PathBuf::new);
            commands::train(&cfg, &out).with_context(|| format!("training into {}", out.display()))
        }
        Command::Evaluate { config, artifact, out, gamma_ladder } => {
            let cfg = load_config(&config, None)?;
            let out = commands::out_dir(out, None, || artifact_dir(&artifact).join("evaluation"));
            commands::evaluate(&cfg, &artifact, &out, gamma_ladder)
        }
        Command::ExportGrid { artifact, config, slice, out } => {
            let cfg = config.map(|c| load_config(&c, None)).transpose()?;
            let out = commands::out_dir(out, None, || artifact_dir(&artifact));
            commands::export_grid(cfg.as_ref(), &artifact, &slice, &out)
        }
        Command::Rollout { config, artifact, state, out } => {
            let cfg = load_config(&config, None)?;
            let out = commands::out_dir(out, None, || artifact_dir(&artifact));
            commands::rollout(&cfg, &artifact, &state, &out).map(|_| ())
        }
        Command::ValidateExhaustive { config, artifact, state, out } => {
            let cfg = load_config(&config, None)?;
            let out = commands::out_dir(out, None, || artifact_dir(&artifact));
            commands::validate_exhaustive(&cfg, &artifact, &state, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(2)
            } else if e.chain().any(|c| matches!(c.downcast_ref::<NeuralError>(), Some(NeuralError::Diverged { .. }))) {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
