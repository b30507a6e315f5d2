use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use selfsim_cli::{run, Command, RunError, RunOptions};

const THREADS_VAR: &str = "SELFSIM_THREADS";

/// Run one verification campaign from a `key = value` config file.
#[derive(Debug, Parser)]
#[command(name = "selfsim", version)]
struct Args {
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Also write SVG plots next to the CSVs.
    #[arg(long)]
    plot: bool,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("{THREADS_VAR} = '{raw}' is not a positive integer"))?;
    if n == 0 {
        return Err(format!("{THREADS_VAR} must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { plot: args.plot, out: args.out, seed: args.seed };
    match run(args.command, &text, &opts) {
        Ok(outcome) => {
            for line in &outcome.log {
                println!("{line}");
            }
            println!(
                "{}",
                if outcome.passed { "all contracts passed" } else { "contract failures recorded in manifest.json" }
            );
            ExitCode::from(outcome.exit_code())
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {}:{}: {}", args.config.display(), e.line, e.message);
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
