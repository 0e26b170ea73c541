//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use mcf_core::flow::{SchemeKind, StartPolicy};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    SphereConvergence,
    Dumbbell,
    MeshGen,
    SingleRun,
}

impl Command {
    pub const ALL: [Command; 4] = [
        Command::SphereConvergence,
        Command::Dumbbell,
        Command::MeshGen,
        Command::SingleRun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SphereConvergence => "sphere-convergence",
            Command::Dumbbell => "dumbbell",
            Command::MeshGen => "mesh-gen",
            Command::SingleRun => "single-run",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                format!("unknown command {s:?} (expected sphere-convergence, dumbbell, mesh-gen or single-run)")
            })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    Sphere,
    Dumbbell,
}

impl SurfaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::Dumbbell => "dumbbell",
        }
    }
}

impl FromStr for SurfaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere" => Ok(SurfaceKind::Sphere),
            "dumbbell" => Ok(SurfaceKind::Dumbbell),
            _ => Err(format!(
                "unknown surface {s:?} (expected sphere or dumbbell)"
            )),
        }
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which refinement series a convergence run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StudyKind {
    Temporal,
    Spatial,
    Both,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Temporal => "temporal",
            StudyKind::Spatial => "spatial",
            StudyKind::Both => "both",
        }
    }
}

impl FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temporal" => Ok(StudyKind::Temporal),
            "spatial" => Ok(StudyKind::Spatial),
            "both" => Ok(StudyKind::Both),
            _ => Err(format!(
                "unknown study {s:?} (expected temporal, spatial or both)"
            )),
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub scheme: SchemeKind,
    /// BDF order `q`.
    pub q: usize,
    /// Element degree `k`.
    pub k: usize,
    pub tau: f64,
    pub t_end: f64,
    pub alpha: f64,
    pub surface: SurfaceKind,
    pub subdivisions: u32,
    /// Sphere radius; ignored for the dumbbell.
    pub radius: f64,
    pub output: PathBuf,
    /// Snapshot every `n` steps; `0` writes the endpoints only.
    pub snapshot_every: usize,
    pub tol: f64,
    pub max_iterations: Option<usize>,
    pub start: StartPolicy,
    pub study: StudyKind,
    /// Step sizes of the temporal series.
    pub taus: Vec<f64>,
    /// Subdivision levels of the spatial series.
    pub spatial_subdivisions: Vec<u32>,
    /// Fixed step of the spatial series.
    pub spatial_tau: f64,
}

impl RunConfig {
    /// Defaults for `command`.
    pub fn defaults(command: Command) -> Self {
        let base = RunConfig {
            command,
            scheme: SchemeKind::Esfem,
            q: 2,
            k: 2,
            tau: 0.0125,
            t_end: 0.6,
            alpha: 0.0,
            surface: SurfaceKind::Sphere,
            subdivisions: 3,
            radius: 2.0,
            output: PathBuf::from("out"),
            snapshot_every: 0,
            tol: 1e-10,
            max_iterations: None,
            start: StartPolicy::Matched,
            study: StudyKind::Both,
            taus: vec![0.2, 0.1, 0.05, 0.025, 0.0125],
            spatial_subdivisions: vec![2, 3, 4],
            spatial_tau: 0.0125,
        };
        match command {
            Command::Dumbbell => RunConfig {
                scheme: SchemeKind::EsfemNormalized,
                tau: 3e-3,
                t_end: 0.3,
                surface: SurfaceKind::Dumbbell,
                subdivisions: 4,
                snapshot_every: 10,
                ..base
            },
            Command::SphereConvergence => RunConfig {
                subdivisions: 4,
                ..base
            },
            Command::MeshGen | Command::SingleRun => base,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, message: &str| {
            Err(CliError::Invalid {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        if !(1..=5).contains(&self.q) {
            return bad("q", "BDF order must be between 1 and 5");
        }
        if !(1..=2).contains(&self.k) {
            return bad("k", "element degree must be 1 or 2");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be positive");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end", "must be positive");
        }
        if self.t_end < self.q as f64 * self.tau * (1.0 - 1e-12) {
            return bad("t_end", "must be at least q·tau");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha", "must be non-negative");
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius", "must be positive");
        }
        if self.subdivisions > 7 {
            return bad("subdivisions", "at most 7");
        }
        if self.output.as_os_str().is_empty() {
            return bad("output", "must not be empty");
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad("tol", "must lie in (0, 1)");
        }
        if self.max_iterations == Some(0) {
            return bad("max_iterations", "must be positive");
        }
        if self.taus.is_empty() || self.taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("taus", "needs positive step sizes");
        }
        if self.taus.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("taus", "must be strictly decreasing");
        }
        if self.spatial_subdivisions.is_empty()
            || self.spatial_subdivisions.windows(2).any(|w| !(w[1] > w[0]))
            || self.spatial_subdivisions.iter().any(|&s| s > 7)
        {
            return bad(
                "spatial_subdivisions",
                "must be strictly increasing levels up to 7",
            );
        }
        if !(self.spatial_tau > 0.0 && self.spatial_tau.is_finite()) {
            return bad("spatial_tau", "must be positive");
        }
        Ok(())
    }

    /// Every key with its value, one per line, in the order they are listed
    /// in [`KEYS`].
    pub fn render(&self) -> String {
        let list = |v: Vec<String>| v.join(",");
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "command" => self.command.to_string(),
                "scheme" => self.scheme.to_string(),
                "q" => self.q.to_string(),
                "k" => self.k.to_string(),
                "tau" => self.tau.to_string(),
                "t_end" => self.t_end.to_string(),
                "alpha" => self.alpha.to_string(),
                "surface" => self.surface.to_string(),
                "subdivisions" => self.subdivisions.to_string(),
                "radius" => self.radius.to_string(),
                "output" => self.output.display().to_string(),
                "snapshot_every" => self.snapshot_every.to_string(),
                "tol" => self.tol.to_string(),
                "max_iterations" => self.max_iterations.map_or("auto".into(), |m| m.to_string()),
                "start" => self.start.to_string(),
                "study" => self.study.to_string(),
                "taus" => list(self.taus.iter().map(|t| t.to_string()).collect()),
                "spatial_subdivisions" => list(
                    self.spatial_subdivisions
                        .iter()
                        .map(|s| s.to_string())
                        .collect(),
                ),
                "spatial_tau" => self.spatial_tau.to_string(),
                _ => unreachable!("every key is rendered"),
            };
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "command" => self.command = parse(key, value)?,
            "scheme" => self.scheme = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "t_end" => self.t_end = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "surface" => self.surface = parse(key, value)?,
            "subdivisions" => self.subdivisions = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "snapshot_every" => self.snapshot_every = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iterations" => {
                self.max_iterations = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "start" => self.start = parse(key, value)?,
            "study" => self.study = parse(key, value)?,
            "taus" => self.taus = parse_list(key, value)?,
            "spatial_subdivisions" => self.spatial_subdivisions = parse_list(key, value)?,
            "spatial_tau" => self.spatial_tau = parse(key, value)?,
            _ => return Err(CliError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

/// Recognised configuration keys.
pub const KEYS: &[&str] = &[
    "command",
    "scheme",
    "q",
    "k",
    "tau",
    "t_end",
    "alpha",
    "surface",
    "subdivisions",
    "radius",
    "output",
    "snapshot_every",
    "tol",
    "max_iterations",
    "start",
    "study",
    "taus",
    "spatial_subdivisions",
    "spatial_tau",
];

fn parse<T>(key: &str, value: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| CliError::Invalid {
        key: key.to_string(),
        message: format!("cannot parse {value:?}: {e}"),
    })
}

fn parse_list<T>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

/// Splits configuration text into ordered `(key, value)` pairs. Blank lines
/// and `#` comments are skipped; a key may appear only once.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut seen = BTreeMap::new();
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Syntax {
            line: i + 1,
            message: format!("expected key = value, found {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(CliError::Syntax {
                line: i + 1,
                message: "missing key".into(),
            });
        }
        if let Some(first) = seen.insert(key.to_string(), i + 1) {
            return Err(CliError::Syntax {
                line: i + 1,
                message: format!("key {key} already set on line {first}"),
            });
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

/// Builds a validated configuration from file pairs and overriding flag
/// pairs. `command` (if given) takes precedence over a `command` key.
pub fn build_config(
    command: Option<Command>,
    file: &[(String, String)],
    flags: &[(String, String)],
) -> Result<RunConfig, CliError> {
    let lookup = |pairs: &[(String, String)]| {
        pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "command")
            .map(|(_, v)| v.clone())
    };
    let command = match command {
        Some(c) => c,
        None => {
            let text = lookup(flags)
                .or_else(|| lookup(file))
                .ok_or_else(|| CliError::Invalid {
                    key: "command".into(),
                    message: "no command given".into(),
                })?;
            parse("command", &text)?
        }
    };
    let mut config = RunConfig::defaults(command);
    for (key, value) in file.iter().chain(flags) {
        if key != "command" {
            config.set(key, value)?;
        }
    }
    config.validate()?;
    Ok(config)
}

/// Parses configuration text on its own.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    build_config(None, &parse_pairs(text)?, &[])
}

/// Turns `--key value` and `--key=value` arguments into pairs; dashes in
/// keys become underscores.
pub fn flag_pairs(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::Flag(arg.clone()))?;
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| CliError::Flag(arg.clone()))?;
                (body.to_string(), v.clone())
            }
        };
        pairs.push((key.replace('-', "_"), value));
    }
    Ok(pairs)
}
