//! `nebi`: dataset synthesis, frame selection training, evaluation and
//! inspection.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use run_config::UsageError;

#[derive(Debug, Parser)]
#[command(name = "nebi", version, about = "Non-uniformly exposed RAW burst synthesis and base frame selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Seed for every random stream of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record that the run must be reproducible. Results never depend on
    /// thread count, so this only marks the resolved config.
    #[arg(long)]
    pub deterministic: bool,
    /// key=value file overriding built-in defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key (after --config); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a dataset of synthetic bursts.
    Synth(commands::SynthArgs),
    /// Train the frame selection network on a dataset.
    Train(commands::TrainArgs),
    /// Choose the base frame of one burst with a trained model.
    Select(commands::SelectArgs),
    /// Compare selection methods on a dataset split.
    Eval(commands::EvalArgs),
    /// Finite-difference checks of the differentiation engine and the network.
    Gradcheck(commands::GradcheckArgs),
    /// Write sRGB PPM previews of burst frames.
    Render(commands::RenderArgs),
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("NEBI_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| run_config::usage(format!("NEBI_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and exit 0.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Select(a) => commands::select(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Render(a) => commands::render(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
