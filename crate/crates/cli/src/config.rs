//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use selfsim::model::ModelParams;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 for errors not tied to a line.
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { line, message: message.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    CertifyEnergy,
    Elliptic,
    Spectrum,
    Resolvent,
    Evolve,
    Fit,
    Report,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::CertifyEnergy => "certify-energy",
            Command::Elliptic => "elliptic",
            Command::Spectrum => "spectrum",
            Command::Resolvent => "resolvent",
            Command::Evolve => "evolve",
            Command::Fit => "fit",
            Command::Report => "report",
        };
        f.write_str(s)
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Command as clap::ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    Gaussian,
    Polynomial,
    ExactBoost,
    Zero,
}

impl FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "polynomial" => Ok(Self::Polynomial),
            "exact-boost" => Ok(Self::ExactBoost),
            "zero" => Ok(Self::Zero),
            other => Err(format!("unknown perturbation kind '{other}'")),
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Polynomial => "polynomial",
            Self::ExactBoost => "exact-boost",
            Self::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub amplitude: f64,
    pub width: f64,
    /// Gaussian center on the first axis.
    pub center: f64,
    /// Gaussian velocity profile factor, `g = velocity * f`.
    pub velocity: f64,
    pub degree: usize,
    pub beta0: Vec<f64>,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub params: ModelParams,
    pub beta: Vec<f64>,
    pub t_blow: f64,
    pub n: usize,
    pub l_max: usize,
    pub omega0: f64,
    pub eps1: f64,
    pub tau_end: f64,
    pub dt_factor: f64,
    pub seed: u64,
    /// Size of the random polynomial suite for energy certificates.
    pub pairs: usize,
    pub perturbation: PerturbationSpec,
    pub output_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "command",
    "d",
    "p",
    "k",
    "R",
    "beta",
    "T",
    "N",
    "l_max",
    "omega0",
    "eps1",
    "tau_end",
    "dt_factor",
    "seed",
    "pairs",
    "perturbation",
    "amplitude",
    "width",
    "center",
    "velocity",
    "degree",
    "beta0",
    "T0",
    "output_dir",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |(l, _)| *l)
    }

    fn get<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, raw)) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(_) => err(*line, format!("{key} = '{raw}' is not {what}")),
            },
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.get::<f64>(key, "a real number")?.unwrap_or(default);
        if !v.is_finite() {
            return err(self.line(key), format!("{key} must be finite"));
        }
        Ok(v)
    }

    fn int(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.get::<usize>(key, "a non-negative integer")?.unwrap_or(default))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((line, raw)) = self.map.get(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for part in raw.split(',') {
            match part.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => return err(*line, format!("{key} = '{raw}' is not a comma-separated list of reals")),
            }
        }
        Ok(Some(out))
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(line, format!("expected 'key = value', found '{content}'"));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return err(line, format!("unknown key '{key}'"));
        }
        if value.is_empty() {
            return err(line, format!("missing value for '{key}'"));
        }
        if map.insert(key.to_string(), (line, value.to_string())).is_some() {
            return err(line, format!("duplicate key '{key}'"));
        }
    }
    Ok(Entries { map })
}

/// Line on which `key` is set, or 0 when it is absent or the text does not tokenize.
pub fn key_line(text: &str, key: &str) -> usize {
    tokenize(text).map_or(0, |e| e.line(key))
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let e = tokenize(text)?;
    let command = e.get::<Command>("command", "a known command")?;
    let d = e.int("d", 1)?;
    if d == 0 || d > 32 {
        return err(e.line("d"), format!("d = {d} must lie in 1..=32"));
    }
    let p = e.real("p", 3.0)?;
    if !(p > 1.0) {
        return err(e.line("p"), format!("p = {p} must exceed 1"));
    }
    let k = e.int("k", 2)?;
    if k == 0 || k > 8 {
        return err(e.line("k"), format!("k = {k} must lie in 1..=8"));
    }
    let r = e.real("R", 1.0)?;
    if !(r >= 1.0) {
        return err(e.line("R"), format!("R = {r} must be at least 1"));
    }
    let params = ModelParams::new(d, p, k, r).map_err(|x| ConfigError { line: e.line("p"), message: x.to_string() })?;

    let beta = e.list("beta")?.unwrap_or_else(|| vec![0.0; d]);
    if beta.len() != d {
        return err(e.line("beta"), format!("beta has {} components, expected d = {d}", beta.len()));
    }
    let speed = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    if !(speed * r < 1.0) {
        return err(e.line("beta"), format!("|beta| = {speed} must be below 1/R"));
    }
    let t_blow = e.real("T", 1.0)?;
    if !(t_blow > 0.0) {
        return err(e.line("T"), format!("T = {t_blow} must be positive"));
    }
    let n = e.int("N", 64)?;
    if !(4..=512).contains(&n) {
        return err(e.line("N"), format!("N = {n} must lie in 4..=512"));
    }
    let l_max = e.int("l_max", 4)?;
    if l_max > 20 {
        return err(e.line("l_max"), format!("l_max = {l_max} must be at most 20"));
    }
    let omega0 = e.real("omega0", params.default_omega0())?;
    if !(omega0 > -params.omega_p && omega0 < 0.0) {
        return err(e.line("omega0"), format!("omega0 = {omega0} must lie in (-{}, 0)", params.omega_p));
    }
    let eps1 = e.real("eps1", 0.1)?;
    if !(eps1 > 0.0 && eps1 < 0.5) {
        return err(e.line("eps1"), format!("eps1 = {eps1} must lie in (0, 1/2)"));
    }
    let tau_end = e.real("tau_end", 8.0)?;
    if !(tau_end > 0.0 && tau_end <= 50.0) {
        return err(e.line("tau_end"), format!("tau_end = {tau_end} must lie in (0, 50]"));
    }
    let dt_factor = e.real("dt_factor", 2.0)?;
    if !(dt_factor > 0.0 && dt_factor <= 4.0) {
        return err(e.line("dt_factor"), format!("dt_factor = {dt_factor} must lie in (0, 4]"));
    }
    let seed = e.get::<u64>("seed", "a non-negative integer")?.unwrap_or(0);
    let pairs = e.int("pairs", 100)?;
    if pairs == 0 || pairs > 100_000 {
        return err(e.line("pairs"), format!("pairs = {pairs} must lie in 1..=100000"));
    }

    let kind = e.get::<PerturbationKind>("perturbation", "one of gaussian, polynomial, exact-boost, zero")?;
    let kind = kind.unwrap_or(PerturbationKind::Gaussian);
    let amplitude = e.real("amplitude", 1e-3)?;
    let width = e.real("width", 0.5)?;
    if !(width > 0.0) {
        return err(e.line("width"), format!("width = {width} must be positive"));
    }
    let center = e.real("center", 0.0)?;
    let velocity = e.real("velocity", 0.0)?;
    let degree = e.int("degree", 4)?;
    if degree > 12 {
        return err(e.line("degree"), format!("degree = {degree} exceeds the cap 12"));
    }
    let beta0 = e.list("beta0")?.unwrap_or_else(|| vec![0.0; d]);
    if beta0.len() != d {
        return err(e.line("beta0"), format!("beta0 has {} components, expected d = {d}", beta0.len()));
    }
    if !(beta0.iter().map(|b| b * b).sum::<f64>() < 1.0) {
        return err(e.line("beta0"), "|beta0| must be below 1");
    }
    let t0 = e.real("T0", 1.0)?;
    if !(t0 > 0.0) {
        return err(e.line("T0"), format!("T0 = {t0} must be positive"));
    }
    let output_dir = e.get::<PathBuf>("output_dir", "a path")?.unwrap_or_else(|| PathBuf::from("selfsim-out"));

    Ok(ExperimentConfig {
        command,
        params,
        beta,
        t_blow,
        n,
        l_max,
        omega0,
        eps1,
        tau_end,
        dt_factor,
        seed,
        pairs,
        perturbation: PerturbationSpec { kind, amplitude, width, center, velocity, degree, beta0, t0 },
        output_dir,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Canonical `key = value` text; parsing it yields the same configuration.
    pub fn canonical(&self) -> String {
        let p = &self.perturbation;
        let mut out = String::new();
        if let Some(c) = self.command {
            out.push_str(&format!("command = {c}\n"));
        }
        let pm = &self.params;
        for (k, v) in [
            ("d", pm.d.to_string()),
            ("p", format!("{}", pm.p)),
            ("k", pm.k.to_string()),
            ("R", format!("{}", pm.r)),
            ("beta", join(&self.beta)),
            ("T", format!("{}", self.t_blow)),
            ("N", self.n.to_string()),
            ("l_max", self.l_max.to_string()),
            ("omega0", format!("{}", self.omega0)),
            ("eps1", format!("{}", self.eps1)),
            ("tau_end", format!("{}", self.tau_end)),
            ("dt_factor", format!("{}", self.dt_factor)),
            ("seed", self.seed.to_string()),
            ("pairs", self.pairs.to_string()),
            ("perturbation", p.kind.to_string()),
            ("amplitude", format!("{}", p.amplitude)),
            ("width", format!("{}", p.width)),
            ("center", format!("{}", p.center)),
            ("velocity", format!("{}", p.velocity)),
            ("degree", p.degree.to_string()),
            ("beta0", join(&p.beta0)),
            ("T0", format!("{}", p.t0)),
            ("output_dir", self.output_dir.display().to_string()),
        ] {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
