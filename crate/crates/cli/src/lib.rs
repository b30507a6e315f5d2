//! Config-driven experiment runner for the `selfsim` workbench.
//!
//! Every command writes CSVs (and optional SVG plots) into an output
//! directory together with `manifest.json`, which lists each file with its
//! SHA-256 digest and every failed contract by name.

// Negated comparisons are how NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{parse_config, Command, ConfigError, ExperimentConfig};
use output::{read_manifest, sha256_hex, Artifacts, Manifest};

/// Errors that stop a run before any contract is judged. They map to exit code 2.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error at {0}")]
    Config(ConfigError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        2
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub plot: bool,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub passed: bool,
    pub log: Vec<String>,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Parses `text`, applies the command-line overrides and runs `command`.
pub fn run(command: Command, text: &str, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let mut cfg = parse_config(text).map_err(RunError::Config)?;
    if let Some(c) = cfg.command {
        if c != command {
            let line = config::key_line(text, "command");
            return Err(RunError::Config(ConfigError {
                line,
                message: format!("config is for '{c}' but '{command}' was requested"),
            }));
        }
    }
    commands::check_command(&cfg, command, |k| config::key_line(text, k)).map_err(RunError::Config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output_dir = out.clone();
    }
    cfg.command = Some(command);
    if command == Command::Report {
        return report(&cfg.output_dir);
    }
    let mut art = Artifacts::new(&cfg.output_dir, opts.plot)?;
    match command {
        Command::CertifyEnergy => commands::certify_energy(&cfg, &mut art)?,
        Command::Elliptic => commands::elliptic(&cfg, &mut art)?,
        Command::Spectrum => commands::spectrum(&cfg, &mut art)?,
        Command::Resolvent => commands::resolvent(&cfg, &mut art)?,
        Command::Evolve => commands::evolve_command(&cfg, &mut art)?,
        Command::Fit => commands::fit_command(&cfg, &mut art)?,
        Command::Report => unreachable!("handled above"),
    }
    let log = std::mem::take(&mut art.log);
    let manifest = art.finish(&command.to_string(), cfg.seed, cfg.canonical())?;
    Ok(RunOutcome { passed: manifest.passed, log, manifest })
}

/// Re-checks the digests of a previous run and summarizes its contracts.
pub fn report(dir: &Path) -> Result<RunOutcome, RunError> {
    let manifest = read_manifest(dir)?;
    let mut log = vec![format!("INFO run of '{}' with seed {}", manifest.command, manifest.seed)];
    let mut passed = manifest.passed && manifest.failures.is_empty();
    for f in &manifest.files {
        match std::fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => log.push(format!("PASS digest {}", f.path)),
            Ok(_) => {
                passed = false;
                log.push(format!("FAIL digest {}: content changed", f.path));
            }
            Err(e) => {
                passed = false;
                log.push(format!("FAIL digest {}: {e}", f.path));
            }
        }
    }
    for f in &manifest.failures {
        log.push(format!("FAIL {}: {}", f.contract, f.message));
    }
    Ok(RunOutcome { passed, log, manifest })
}
