use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trihelix::infomeasure::{MaxEntropyMode, UnitScale};

#[derive(Debug, Parser)]
#[command(name = "trihelix", version, about = "Triple-Helix synergy indicators over categorical micro-data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropies, transmissions and mutual redundancy for one table.
    Compute(ComputeArgs),
    /// Within-group transmissions and the between-group surplus.
    Decompose(DecomposeArgs),
    /// Per-period entropy, maximum entropy and redundancy.
    Panel(PanelArgs),
    /// Write a synthetic record set with known information structure.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// JSON ingest configuration.
    #[arg(long, conflicts_with = "input")]
    pub config: Option<PathBuf>,

    /// Delimited file whose columns are all dimensions, except `weight` and `period`.
    #[arg(long, required_unless_present = "config")]
    pub input: Option<PathBuf>,

    /// Dimensions to measure, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<String>>,

    #[arg(long, value_enum)]
    pub unit: Option<Unit>,

    #[arg(long, value_enum)]
    pub max_mode: Option<MaxMode>,

    /// Tolerance for the verdict and surplus sign.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Write ingest statistics as JSON to this path.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Grouping dimension, e.g. a region.
    #[arg(long)]
    pub group: String,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Also write the per-group CSV here.
    #[arg(long)]
    pub groups_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Also write the SVG chart here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator spec; the flags below build one otherwise.
    #[arg(long, conflicts_with_all = ["kind", "cardinalities", "lambda", "concentration", "pmf_seed"])]
    pub spec: Option<PathBuf>,

    #[arg(long, value_enum, required_unless_present = "spec")]
    pub kind: Option<Kind>,

    /// Records per period.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    #[arg(long, default_value_t = 1)]
    pub periods: usize,

    /// Emit each support tuple exactly n * p times instead of sampling.
    #[arg(long, conflicts_with = "seed")]
    pub balanced: bool,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_delimiter = ',')]
    pub cardinalities: Option<Vec<usize>>,

    /// Dimensions for `copy`.
    #[arg(long, default_value_t = 3)]
    pub n_dims: usize,

    #[arg(long)]
    pub lambda: Option<f64>,

    #[arg(long)]
    pub concentration: Option<f64>,

    #[arg(long)]
    pub pmf_seed: Option<u64>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
    Svg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Unit {
    Bits,
    Mbits,
}

impl From<Unit> for UnitScale {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Bits => UnitScale::Bits,
            Unit::Mbits => UnitScale::Millibits,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MaxMode {
    Declared,
    Observed,
    Cumulative,
}

impl From<MaxMode> for MaxEntropyMode {
    fn from(m: MaxMode) -> Self {
        match m {
            MaxMode::Declared => MaxEntropyMode::Declared,
            MaxMode::Observed => MaxEntropyMode::Observed,
            MaxMode::Cumulative => MaxEntropyMode::Cumulative,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    Independent,
    Copy,
    Parity,
    Coupled,
    RandomJoint,
}
