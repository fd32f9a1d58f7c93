//! Run configuration: command-line flags layered over an optional
//! `key=value` file, with a textual form that round-trips.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minmix::convergence::StudyConfig;
use minmix::physics::Problem;
use minmix::solver::{Pinning, Preconditioner, SolveOptions};
use minmix::spaces::NormalInterp;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("config file line {line}: {msg}")]
    File { line: usize, msg: String },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Study,
    Verify,
    Export,
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Csv,
    Md,
    Vtk,
    Mtx,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecondArg {
    None,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    FaceCenter,
    FaceAverage,
}

macro_rules! value_enum_text {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
            }
        }
        impl FromStr for $t {
            type Err = ConfigError;
            fn from_str(s: &str) -> Result<Self, ConfigError> {
                <$t as ValueEnum>::from_str(s, true).map_err(|e| invalid(e))
            }
        }
    )*};
}

value_enum_text!(Command, Format, PrecondArg, InterpArg);

/// Mixed finite element elasticity solver and verification harness.
#[derive(Debug, Parser)]
#[command(name = "minmix", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Convergence study over refinement levels.
    Study(Flags),
    /// Stability certificates on one grid.
    Verify(Flags),
    /// Solve one grid and write fields or matrices.
    Export(Flags),
    /// Solve one grid and print errors and solver statistics.
    Solve(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// e1, e2, e3 or traction.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// `L` for levels 1..=L, or `A..B` for A..=B.
    #[arg(long)]
    pub levels: Option<String>,
    /// Cells per axis of a uniform grid.
    #[arg(long)]
    pub n: Option<usize>,
    /// Cells per axis, e.g. `4x4` or `2x4x2`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub precond: Option<PrecondArg>,
    /// Keep the frame kernel instead of pinning it.
    #[arg(long)]
    pub no_pin: bool,
    /// Gauss points per axis for the stress error norm.
    #[arg(long)]
    pub quad: Option<usize>,
    /// Gauss points per axis for the load integrals.
    #[arg(long)]
    pub load_quad: Option<usize>,
    /// Sampling of the normal stress interpolant.
    #[arg(long, value_enum)]
    pub normal_interp: Option<InterpArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Vec<Format>,
    /// `key=value` file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: Problem,
    pub dim: usize,
    pub levels: Vec<usize>,
    /// Grid for single-grid commands; derived from the last level if unset.
    pub grid: Option<Vec<usize>>,
    pub lambda: f64,
    pub mu: f64,
    pub tol: f64,
    pub max_iters: Option<usize>,
    pub precond: PrecondArg,
    pub pin: bool,
    pub quad: usize,
    pub load_quad: usize,
    pub normal_interp: InterpArg,
    pub seed: u64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let formats = match command {
            Command::Study => vec![Format::Csv, Format::Md],
            Command::Verify => vec![Format::Csv, Format::Text],
            Command::Export => vec![Format::Vtk],
            Command::Solve => vec![Format::Text],
        };
        Self {
            command,
            problem: Problem::E1,
            dim: 2,
            levels: StudyConfig::reference_levels(Problem::E1),
            grid: None,
            lambda: 1.0,
            mu: 0.5,
            tol: 1e-10,
            max_iters: None,
            precond: PrecondArg::Diagonal,
            pin: true,
            quad: 3,
            load_quad: 1,
            normal_interp: InterpArg::FaceCenter,
            seed: 20240601,
            out: PathBuf::from("."),
            formats,
        }
    }

    /// Grid of single-grid commands.
    pub fn cells(&self) -> Vec<usize> {
        match &self.grid {
            Some(g) => g.clone(),
            None => {
                let level = *self.levels.last().expect("validated levels");
                vec![1 << (level - 1); self.dim]
            }
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            preconditioner: match self.precond {
                PrecondArg::None => Preconditioner::None,
                PrecondArg::Diagonal => Preconditioner::Diagonal,
            },
            pinning: if self.pin { Pinning::SlabOrigin } else { Pinning::Off },
            ..Default::default()
        }
    }

    pub fn normal_mode(&self) -> NormalInterp {
        match self.normal_interp {
            InterpArg::FaceCenter => NormalInterp::FaceCenter,
            InterpArg::FaceAverage => NormalInterp::FaceAverage(self.quad),
        }
    }

    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            problem: self.problem,
            levels: self.levels.clone(),
            lambda: self.lambda,
            mu: self.mu,
            solver: self.solve_options(),
            load_quad: self.load_quad,
            norm_quad: self.quad,
            normal_interp: self.normal_mode(),
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| invalid(format!("{key}: not a number: {v}")));
        let int = |v: &str| v.parse::<usize>().map_err(|_| invalid(format!("{key}: not an integer: {v}")));
        match key {
            "command" => self.command = value.parse()?,
            "problem" => {
                self.problem = value.parse().map_err(|e: minmix::Error| invalid(e.to_string()))?;
                self.dim = self.problem.dim();
            }
            "dim" => self.dim = int(value)?,
            "levels" => self.levels = parse_levels(value)?,
            "n" => self.grid = Some(vec![int(value)?; self.dim]),
            "grid" => self.grid = if value.is_empty() { None } else { Some(parse_grid(value)?) },
            "lambda" => self.lambda = num(value)?,
            "mu" => self.mu = num(value)?,
            "tol" => self.tol = num(value)?,
            "max_iters" => self.max_iters = if value.is_empty() { None } else { Some(int(value)?) },
            "precond" => self.precond = value.parse()?,
            "pin" => self.pin = value.parse().map_err(|_| invalid(format!("pin: expected true or false, got {value}")))?,
            "quad" => self.quad = int(value)?,
            "load_quad" => self.load_quad = int(value)?,
            "normal_interp" => self.normal_interp = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| invalid(format!("seed: {value}")))?,
            "out" => self.out = PathBuf::from(value),
            "format" => {
                self.formats = value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim().parse())
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(invalid(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` document; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut entries = BTreeMap::new();
        let mut order = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::File {
                line: k + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), (k + 1, value.trim().to_string())).is_none() {
                order.push(key);
            }
        }
        // problem fixes the default dimension, so it goes before dim, n and grid
        order.sort_by_key(|k| match k.as_str() {
            "command" => 0,
            "problem" => 1,
            "dim" => 2,
            _ => 3,
        });
        for key in order {
            let (line, value) = &entries[&key];
            self.set(&key, value).map_err(|e| ConfigError::File {
                line: *line,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let grid = self
            .grid
            .as_ref()
            .map(|g| g.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x"))
            .unwrap_or_default();
        let levels = match (self.levels.first(), self.levels.last()) {
            (Some(a), Some(b)) => format!("{a}..{b}"),
            _ => String::new(),
        };
        let formats: Vec<String> = self.formats.iter().map(|f| f.to_string()).collect();
        let lines = [
            format!("command={}", self.command),
            format!("problem={}", self.problem),
            format!("dim={}", self.dim),
            format!("levels={levels}"),
            format!("grid={grid}"),
            format!("lambda={:?}", self.lambda),
            format!("mu={:?}", self.mu),
            format!("tol={:?}", self.tol),
            format!("max_iters={}", self.max_iters.map(|m| m.to_string()).unwrap_or_default()),
            format!("precond={}", self.precond),
            format!("pin={}", self.pin),
            format!("quad={}", self.quad),
            format!("load_quad={}", self.load_quad),
            format!("normal_interp={}", self.normal_interp),
            format!("seed={}", self.seed),
            format!("out={}", self.out.display()),
            format!("format={}", formats.join(",")),
        ];
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults(Command::Study);
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.problem.is_traction() && self.dim != 2 {
            return Err(invalid("the traction problem is two-dimensional"));
        }
        let needs_problem_dim = matches!(self.command, Command::Study | Command::Export | Command::Solve);
        if needs_problem_dim && self.dim != self.problem.dim() {
            return Err(invalid(format!(
                "problem {} is {}-dimensional, got --dim {}",
                self.problem,
                self.problem.dim(),
                self.dim
            )));
        }
        if self.dim == 0 || self.dim > 4 {
            return Err(invalid(format!("dimension {} outside 1..=4", self.dim)));
        }
        if self.levels.is_empty() || self.levels[0] == 0 {
            return Err(invalid("levels start at 1"));
        }
        if let Some(g) = &self.grid {
            if g.len() != self.dim {
                return Err(invalid(format!("grid has {} axes, dimension is {}", g.len(), self.dim)));
            }
            if g.contains(&0) {
                return Err(invalid("grid axes need at least one cell"));
            }
        }
        if !(self.lambda > 0.0 && self.mu > 0.0) {
            return Err(invalid("lambda and mu must be positive"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid("tol must lie in (0, 1)"));
        }
        for (name, g) in [("quad", self.quad), ("load_quad", self.load_quad)] {
            if !(1..=5).contains(&g) {
                return Err(invalid(format!("{name} must be in 1..=5")));
            }
        }
        for f in &self.formats {
            let ok = match self.command {
                Command::Study => matches!(f, Format::Csv | Format::Md),
                Command::Verify => matches!(f, Format::Csv | Format::Text),
                Command::Export => matches!(f, Format::Vtk | Format::Mtx | Format::Csv),
                Command::Solve => matches!(f, Format::Text | Format::Csv),
            };
            if !ok {
                return Err(invalid(format!("format {f} is not available for {}", self.command)));
            }
        }
        Ok(())
    }
}

pub fn parse_levels(s: &str) -> Result<Vec<usize>, ConfigError> {
    let bad = || invalid(format!("levels: expected L or A..B, got '{s}'"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
        }
        None => (1, s.trim().parse().map_err(|_| bad())?),
    };
    if a == 0 || b < a || b > 16 {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

pub fn parse_grid(s: &str) -> Result<Vec<usize>, ConfigError> {
    s.split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>().map_err(|_| invalid(format!("grid: expected e.g. 4x4, got '{s}'"))))
        .collect()
}

/// Defaults, then the config file, then explicit flags.
pub fn resolve(command: Command, flags: &Flags) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::defaults(command);
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
        cfg.command = command;
    }
    let levels_explicit = flags.levels.is_some();
    if let Some(p) = &flags.problem {
        cfg.set("problem", p)?;
        if !levels_explicit && flags.config.is_none() {
            cfg.levels = StudyConfig::reference_levels(cfg.problem);
        }
    }
    if let Some(d) = flags.dim {
        cfg.dim = d;
    }
    if let Some(l) = &flags.levels {
        cfg.set("levels", l)?;
    }
    if let Some(g) = &flags.grid {
        cfg.set("grid", g)?;
    }
    if let Some(n) = flags.n {
        cfg.grid = Some(vec![n; cfg.dim]);
    }
    if let Some(v) = flags.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = flags.mu {
        cfg.mu = v;
    }
    if let Some(v) = flags.tol {
        cfg.tol = v;
    }
    if flags.max_iters.is_some() {
        cfg.max_iters = flags.max_iters;
    }
    if let Some(p) = flags.precond {
        cfg.precond = p;
    }
    if flags.no_pin {
        cfg.pin = false;
    }
    if let Some(q) = flags.quad {
        cfg.quad = q;
    }
    if let Some(q) = flags.load_quad {
        cfg.load_quad = q;
    }
    if let Some(m) = flags.normal_interp {
        cfg.normal_interp = m;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(o) = &flags.out {
        cfg.out = o.clone();
    }
    if !flags.format.is_empty() {
        cfg.formats = flags.format.clone();
    }
    if command == Command::Verify && cfg.grid.is_none() && flags.problem.is_none() && flags.levels.is_none() {
        cfg.grid = Some(vec![4; cfg.dim]);
    }
    cfg.formats.sort();
    cfg.formats.dedup();
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_args<I, S>(argv: I) -> Result<RunConfig, ParseFailure>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseFailure::Clap)?;
    let (command, flags) = match &cli.command {
        Sub::Study(f) => (Command::Study, f),
        Sub::Verify(f) => (Command::Verify, f),
        Sub::Export(f) => (Command::Export, f),
        Sub::Solve(f) => (Command::Solve, f),
    };
    resolve(command, flags).map_err(ParseFailure::Config)
}

#[derive(Debug)]
pub enum ParseFailure {
    Clap(clap::Error),
    Config(ConfigError),
}
