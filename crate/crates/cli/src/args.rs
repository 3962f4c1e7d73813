//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::io::{parse_grid, Transform};

#[derive(Debug, Clone, Parser)]
#[command(name = "georisk", version, about = "Nonparametric exceedance-probability maps for geostatistical data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit trend and variogram, then bootstrap exceedance probabilities on a grid.
    Riskmap(RiskmapArgs),
    /// Run the Monte Carlo study.
    Simulate(SimulateArgs),
    /// Fit trend and variogram and write the estimates.
    Fit(FitArgs),
    /// Write a synthetic file in the precipitation input format.
    SynthData(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Shared {
    /// Input CSV with columns x, y, value.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub transform: Option<Transform>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MapMode {
    Corrected,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Table1,
    Table2,
    Table3,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScaleArg {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DesignArg {
    Regular,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthRule {
    Mase,
    Cgcv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RiskmapArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Comma-separated thresholds on the modeled (transformed) scale.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub thresholds: Option<Vec<f64>>,
    /// Bootstrap replicates B.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Prediction grid as NXxNY over the data bounding box.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<[usize; 2]>,
    #[arg(long, value_enum)]
    pub mode: Option<MapMode>,
    /// Also write one SVG heatmap per threshold.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioKind>,
    #[arg(long, value_enum)]
    pub scale: Option<ScaleArg>,
    /// Data locations per axis (n = side x side), or NXxNY with equal sides.
    #[arg(long = "n", value_parser = parse_side)]
    pub side: Option<usize>,
    /// Monte Carlo replicates N.
    #[arg(long = "N")]
    pub replicates: Option<usize>,
    /// Bootstrap replicates B.
    #[arg(long = "B")]
    pub bootstrap: Option<usize>,
    /// Practical range r.
    #[arg(long)]
    pub range: Option<f64>,
    /// Sill c0 + c1.
    #[arg(long, allow_negative_numbers = true)]
    pub sill: Option<f64>,
    /// Nugget as a fraction of the sill.
    #[arg(long, allow_negative_numbers = true)]
    pub nugget_frac: Option<f64>,
    #[arg(long, value_enum)]
    pub design: Option<DesignArg>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub thresholds: Option<Vec<f64>>,
    /// Prediction grid nodes per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Trend bandwidth rule.
    #[arg(long, value_enum)]
    pub bandwidth: Option<BandwidthRule>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<[usize; 2]>,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub shared: Shared,
    /// Number of locations.
    #[arg(long = "n")]
    pub count: Option<usize>,
}

fn parse_side(s: &str) -> Result<usize, String> {
    match parse_grid(s)? {
        [a, b] if a == b => Ok(a),
        _ => Err(format!("simulation designs are square, got '{s}'")),
    }
}
