//! Command-line flags, the optional TOML config file, and their merge.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmcomm::grid::ProcessorGrid;
use mmcomm::model::ProblemShape;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Largest number of rows a single sweep may produce.
pub const MAX_SWEEP_ROWS: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(name = "mmcomm", version, about = "Communication lower bounds for parallel matrix multiplication")]
pub struct Cli {
    /// TOML file supplying defaults for any flag; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regime, accessed-data term and lower bound for one shape and P.
    Bound(Flags),
    /// Analytic and exhaustive processor grids with their costs.
    Grid(Flags),
    /// Run the grid algorithm on virtual processors and count words.
    Simulate(Flags),
    /// KKT, numeric-oracle, quasiconvexity and (with --tiny) projection checks.
    Verify(Flags),
    /// One row per P over a range, or the table of prior constants.
    Sweep(Flags),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Bound(_) => CommandKind::Bound,
            Command::Grid(_) => CommandKind::Grid,
            Command::Simulate(_) => CommandKind::Simulate,
            Command::Verify(_) => CommandKind::Verify,
            Command::Sweep(_) => CommandKind::Sweep,
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Bound(f) | Command::Grid(f) | Command::Simulate(f) | Command::Verify(f) | Command::Sweep(f) => f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Bound,
    Grid,
    Simulate,
    Verify,
    Sweep,
}

#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    #[arg(long, num_args = 3, value_names = ["N1", "N2", "N3"])]
    pub shape: Option<Vec<u64>>,

    /// A processor count `P` or an inclusive range `LO:HI`.
    #[arg(long, value_name = "P|LO:HI")]
    pub procs: Option<ProcRange>,

    /// Words of local memory per processor.
    #[arg(long, value_name = "M")]
    pub memory: Option<f64>,

    /// Grid factors aligned to (n1, n2, n3).
    #[arg(long, num_args = 3, value_names = ["P1", "P2", "P3"])]
    pub grid: Option<Vec<u64>>,

    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Write output here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Add the exhaustive projection oracle (lattices of at most 24 points).
    #[arg(long)]
    pub tiny: bool,

    #[arg(long, value_enum)]
    pub table: Option<Table>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Human,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Constants,
}

/// Inclusive processor range; a single count has `lo == hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProcRange {
    pub lo: u64,
    pub hi: u64,
}

impl ProcRange {
    pub fn single(&self) -> Option<u64> {
        (self.lo == self.hi).then_some(self.lo)
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for ProcRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.single() {
            Some(p) => write!(f, "{p}"),
            None => write!(f, "{}:{}", self.lo, self.hi),
        }
    }
}

impl FromStr for ProcRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("invalid processor count {t:?}: {e}"));
        let (lo, hi) = match s.split_once(':') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let p = parse(s)?;
                (p, p)
            }
        };
        if lo == 0 {
            return Err("processor counts must be positive".into());
        }
        if lo > hi {
            return Err(format!("empty processor range {lo}:{hi}"));
        }
        Ok(ProcRange { lo, hi })
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ProcValue {
    Count(u64),
    Text(String),
}

/// Keys accepted in a `--config` file; each mirrors the flag of that name.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    shape: Option<[u64; 3]>,
    procs: Option<ProcValue>,
    memory: Option<f64>,
    grid: Option<[u64; 3]>,
    seed: Option<u64>,
    format: Option<Format>,
    out: Option<PathBuf>,
    tiny: Option<bool>,
    table: Option<Table>,
}

impl FileConfig {
    fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings for one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub shape: Option<ProblemShape>,
    pub procs: Option<ProcRange>,
    pub memory: Option<f64>,
    pub grid: Option<ProcessorGrid>,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub tiny: bool,
    pub table: Option<Table>,
}

fn triple(values: &[u64], what: &str) -> CliResult<[u64; 3]> {
    values
        .try_into()
        .map_err(|_| CliError::Config(format!("{what} needs exactly three values, got {}", values.len())))
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> CliResult<Self> {
        let file = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let flags = cli.command.flags();

        let shape = match (&flags.shape, file.shape) {
            (Some(v), _) => Some(triple(v, "--shape")?),
            (None, s) => s,
        };
        let shape = shape.map(|[a, b, c]| ProblemShape::new(a, b, c)).transpose()?;

        let grid = match (&flags.grid, file.grid) {
            (Some(v), _) => Some(triple(v, "--grid")?),
            (None, g) => g,
        };
        let grid = grid.map(|[a, b, c]| ProcessorGrid::new(a, b, c)).transpose()?;

        let procs = match (flags.procs, file.procs) {
            (Some(p), _) => Some(p),
            (None, Some(ProcValue::Count(p))) => Some(p.to_string().parse().map_err(CliError::Config)?),
            (None, Some(ProcValue::Text(t))) => Some(t.parse().map_err(CliError::Config)?),
            (None, None) => None,
        };

        Ok(RunConfig {
            command: cli.command.kind(),
            shape,
            procs,
            memory: flags.memory.or(file.memory),
            grid,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            format: flags.format.or(file.format).unwrap_or_default(),
            out: flags.out.clone().or(file.out),
            tiny: flags.tiny || file.tiny.unwrap_or(false),
            table: flags.table.or(file.table),
        })
    }

    pub fn require_shape(&self) -> CliResult<ProblemShape> {
        self.shape.ok_or_else(|| CliError::Config("--shape N1 N2 N3 is required".into()))
    }

    pub fn require_range(&self) -> CliResult<ProcRange> {
        let range = self.procs.ok_or_else(|| CliError::Config("--procs is required".into()))?;
        if range.len() > MAX_SWEEP_ROWS {
            return Err(CliError::Config(format!("range {range} exceeds {MAX_SWEEP_ROWS} rows")));
        }
        Ok(range)
    }

    pub fn require_single_procs(&self) -> CliResult<u64> {
        let range = self.procs.ok_or_else(|| CliError::Config("--procs P is required".into()))?;
        range
            .single()
            .ok_or_else(|| CliError::Config(format!("expected a single processor count, got range {range}")))
    }
}
