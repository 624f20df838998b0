// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line flags. Every subcommand's flags can also be given in the
//! matching table of a TOML config file; values on the command line win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "lrsm",
    version,
    about = "Change-point inference for count time series"
)]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with defaults for every flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a built-in or user-specified model to a CSV file.
    Simulate(SimulateArgs),
    /// Detect change-points in a count series.
    Detect(DetectArgs),
    /// Confidence intervals for detected change-points.
    Ci(CiArgs),
    /// Run a named Monte-Carlo experiment.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Max,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Approx,
    Pba,
    Bba,
    All,
}

/// Block length: a number or `adaptive`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(usize),
    Named(String),
}

impl std::str::FromStr for Bandwidth {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(s.parse()
            .map_or_else(|_| Bandwidth::Named(s.to_string()), Bandwidth::Fixed))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Built-in model identifier such as A1, B3 or C9.
    #[arg(long, conflicts_with = "spec")]
    pub model: Option<String>,
    /// JSON model specification instead of a built-in model.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Series length for a built-in model.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Output CSV; the true model goes to `<out>.truth.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct DetectArgs {
    /// Input CSV with one count per line.
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// Window radius.
    #[arg(long)]
    pub h: Option<usize>,
    /// Several window radii, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "h")]
    pub h_mix: Option<Vec<usize>>,
    /// Multiplier of the window rule.
    #[arg(long)]
    pub d: Option<f64>,
    /// Several multipliers of the window rule, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub d_mix: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    #[arg(long)]
    pub p_max: Option<usize>,
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Order selection criterion of the window fits.
    #[arg(long, value_enum)]
    pub criterion: Option<Criterion>,
    /// Recorded in the report; detection itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of scan scores `t, score, h`.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct CiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub detect: DetectArgs,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bootstrap replicates.
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub replicates: Option<usize>,
    /// Block length of the block bootstrap, a number or `adaptive`.
    #[arg(long)]
    pub nb: Option<Bandwidth>,
    /// Half-length of the parametric bootstrap sample; defaults to n/2.
    #[arg(long)]
    pub np: Option<usize>,
    /// Detect report to reuse instead of running detection.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct BenchArgs {
    /// Experiment name: table1, models2000, models10000, coverage or scaling.
    #[arg(long)]
    pub exp: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bootstrap replicates of the coverage experiment.
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
