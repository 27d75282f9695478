mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "fuznet",
    version,
    about = "Multi-level attention networks for PHQ-8 regression"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Root directory for run outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub scale_divisor: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus.
    Generate(commands::GenerateArgs),
    /// Train a model on a corpus.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint on one corpus partition.
    Eval(commands::EvalArgs),
    /// Modality attention ratios of an all_fusion checkpoint.
    ReportAttention(commands::EvalArgs),
    /// Finite-difference check of every layer and model kind.
    Gradcheck(commands::GradcheckArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&cli.common, a),
        Command::Train(a) => commands::train(&cli.common, a),
        Command::Eval(a) => commands::eval(&cli.common, a, false),
        Command::ReportAttention(a) => commands::eval(&cli.common, a, true),
        Command::Gradcheck(a) => commands::gradcheck(&cli.common, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.into()
        }
    }
}
