use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

use commands::{Outcome, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Structural,
    Witness,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    BottomUp,
    TopDown,
    Direct,
    /// Bottom-up decomposition, then recombination.
    Decomposed,
}

#[derive(Debug, Parser)]
#[command(name = "gcs", version, about = "Analyze, decompose and solve geometric constraint systems")]
struct Cli {
    /// Residual tolerance for solving.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,
    /// Relative singular-value tolerance for Jacobian rank.
    #[arg(long = "rank-tol", global = true, default_value_t = 1e-8)]
    rank_tol: f64,
    /// Witness seed; the GCS_SEED environment variable takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 3)]
    witnesses: usize,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
    #[arg(long, global = true, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long = "max-iter", global = true, default_value_t = 100)]
    max_iter: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Characterize the constraint state (exit 0 well, 3 under, 4 over,
    /// 5 over-and-under, 6 unstable).
    Check { model: PathBuf },
    /// Find dependent constraint groups and well-constrained parts.
    Detect { model: PathBuf },
    /// Build a cluster tree (bottom-up or top-down).
    Decompose { model: PathBuf },
    /// Solve directly or by decomposition.
    Solve { model: PathBuf },
}

fn seed_override(cli_seed: u64) -> Result<u64, String> {
    match std::env::var("GCS_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| format!("GCS_SEED is not an unsigned integer: {s:?}")),
        Err(_) => Ok(cli_seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let seed = match seed_override(cli.seed) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let positive = |t: f64| t.is_finite() && t > 0.0;
    if !positive(cli.tolerance) || !positive(cli.rank_tol) || cli.witnesses == 0 || cli.max_iter == 0 {
        eprintln!("error: tolerances must be positive and --witnesses, --max-iter at least 1");
        return ExitCode::from(1);
    }
    let config = RunConfig {
        tolerance: cli.tolerance,
        rank_tol: cli.rank_tol,
        seed,
        witnesses: cli.witnesses,
        mode: cli.mode,
        strategy: cli.strategy,
        max_iter: cli.max_iter,
    };
    let outcome = match &cli.command {
        Command::Check { model } => commands::check(model, &config),
        Command::Detect { model } => commands::detect(model, &config),
        Command::Decompose { model } => commands::decompose(model, &config),
        Command::Solve { model } => commands::solve(model, &config),
    };
    emit(outcome, cli.format)
}

fn emit(outcome: Outcome, format: Format) -> ExitCode {
    match outcome {
        Outcome::Report { json, text, notes, code } => {
            let body = match format {
                Format::Json => format!("{}\n", serde_json::to_string_pretty(&json).expect("report serializes")),
                Format::Text => text,
            };
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = std::io::stdout().lock().write_all(body.as_bytes());
            for n in notes {
                eprintln!("note: {n}");
            }
            ExitCode::from(code)
        }
        Outcome::Error { messages, code } => {
            for m in messages {
                eprintln!("error: {m}");
            }
            ExitCode::from(code)
        }
    }
}
