mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use run::CliError;

/// Synthetic multi-view crowd datasets: generation, evaluation, statistics,
/// ground-plane fusion and OT loss.
#[derive(Debug, Parser)]
#[command(name = "forge", version)]
struct Cli {
    /// Worker threads (0 = one per core). Outputs do not depend on it.
    #[arg(long, global = true, env = "MVFORGE_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output directory; nothing is written outside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset: scenes, frames, per-view annotations and maps.
    Generate(commands::generate::GenerateArgs),
    /// Score point predictions against a dataset's ground truth.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Count histogram, weather/time shares and a summary card for a dataset.
    Stats(commands::stats::StatsArgs),
    /// Project per-view maps to the ground plane and max-fuse them.
    Fuse(commands::fuse::FuseArgs),
    /// Unbalanced OT loss between a predicted density map and annotated dots.
    OtLoss(commands::ot_loss::OtLossArgs),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Generate(a) => commands::generate::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Stats(a) => commands::stats::run(a),
        Command::Fuse(a) => commands::fuse::run(a),
        Command::OtLoss(a) => commands::ot_loss::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are user errors; 2 is reserved for internal failures.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(2)
        }
    }
}
