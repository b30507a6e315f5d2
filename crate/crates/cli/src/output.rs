//! Deterministic artifact writing and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Floats are written with 17 significant digits so they round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub contract: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// Canonical configuration text that produced the run.
    pub config: String,
    pub passed: bool,
    pub files: Vec<FileRecord>,
    pub failures: Vec<FailureRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects written files and contract outcomes for one run.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    plot: bool,
    pub files: Vec<FileRecord>,
    pub failures: Vec<FailureRecord>,
    /// One human-readable line per checked contract.
    pub log: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, plot: bool) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), plot, files: Vec::new(), failures: Vec::new(), log: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn plots_enabled(&self) -> bool {
        self.plot
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.path(name), bytes)?;
        self.record(name, bytes);
        Ok(())
    }

    /// Registers a file some other writer already produced.
    pub fn register(&mut self, name: &str) -> io::Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.record(name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        self.write(name, &bytes)
    }

    /// Records a contract outcome; `Err` becomes a named failure.
    pub fn check(&mut self, contract: &str, outcome: Result<String, String>) {
        match outcome {
            Ok(detail) => self.log.push(format!("PASS {contract}: {detail}")),
            Err(message) => {
                self.log.push(format!("FAIL {contract}: {message}"));
                self.failures.push(FailureRecord { contract: contract.to_string(), message });
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn finish(mut self, command: &str, seed: u64, config: String) -> io::Result<Manifest> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            config,
            passed: self.passed(),
            files: self.files,
            failures: self.failures,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> io::Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
