use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use volterra_capacity::cli::{self, RunOptions};

/// Capacity analysis of Volterra-type quadratic forms.
#[derive(Parser)]
#[command(name = "volcap", version)]
struct Args {
    /// Problem spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Seed for the randomized symmetry probe.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = cli::run(&args.spec, &args.out, RunOptions { seed: args.seed, verbose: args.verbose });
    if let Err(e) = &result {
        eprintln!("volcap: error: {e}");
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
