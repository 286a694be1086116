use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nmq_cli::{run, Command, ExperimentConfig};

/// Non-Markovian single-qubit dynamics pipeline.
#[derive(Debug, Parser)]
#[command(name = "nmq", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per basis; 0 uses exact probabilities.
    #[arg(long)]
    shots: Option<u64>,
    /// Tolerance for the command's witness (cp-div, backflow threshold or
    /// correlation); applies to cp-div for the other commands.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = ExperimentConfig::load(&args.config).and_then(|mut cfg| {
        if let Some(out) = args.out {
            cfg.output_dir = out;
        }
        if let Some(seed) = args.seed {
            cfg.seed = Some(seed);
        }
        if let Some(shots) = args.shots {
            cfg.shots = shots;
        }
        if let Some(tol) = args.tol {
            match args.command {
                Command::Backflow => cfg.tolerances.backflow = Some(tol),
                Command::Crosstalk => cfg.tolerances.correlation = tol,
                _ => cfg.tolerances.cp_div = tol,
            }
        }
        run(args.command, &cfg)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("wrote {} files and manifest.json", outcome.manifest.files.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
