//! Command-line surface of the `gridsched` binary.

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use gridsched_core::engine::{GameMode, InitPolicy, OrderPolicy};
use gridsched_core::scenario::{Flexibility, Homogeneity};

#[derive(Parser)]
#[command(
    name = "gridsched",
    version,
    about = "Simulate and solve distributed appliance-scheduling games under demand-dependent pricing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario file.
    Generate(GenerateArgs),
    /// Run best-response dynamics on a scenario and emit result CSVs.
    Run(RunArgs),
    /// Brute-force a small scenario: optimum, equilibria, price of anarchy.
    Oracle(OracleArgs),
    /// Certify a tariff against the regularity conditions.
    CheckPricing(CheckPricingArgs),
    /// Run a matrix of generated scenarios and collect a combined summary.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sa,
    Ma,
}

impl From<ModeArg> for GameMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Sa => GameMode::SingleAppliance,
            ModeArg::Ma => GameMode::MultiAppliance,
        }
    }
}

impl fmt::Display for ModeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeArg::Sa => write!(f, "sa"),
            ModeArg::Ma => write!(f, "ma"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Roundrobin,
    Random,
}

impl From<OrderArg> for OrderPolicy {
    fn from(order: OrderArg) -> Self {
        match order {
            OrderArg::Roundrobin => OrderPolicy::RoundRobin,
            OrderArg::Random => OrderPolicy::RandomPerPass,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Greedy,
    Random,
}

impl From<InitArg> for InitPolicy {
    fn from(init: InitArg) -> Self {
        match init {
            InitArg::Greedy => InitPolicy::GreedyEarliest,
            InitArg::Random => InitPolicy::RandomFeasible,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlexArg {
    Fix,
    Short,
    Long,
}

impl From<FlexArg> for Flexibility {
    fn from(flex: FlexArg) -> Self {
        match flex {
            FlexArg::Fix => Flexibility::Fix,
            FlexArg::Short => Flexibility::Short,
            FlexArg::Long => Flexibility::Long,
        }
    }
}

impl fmt::Display for FlexArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Flexibility::from(*self))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HomoArg {
    Homogeneous,
    Heterogeneous,
}

impl From<HomoArg> for Homogeneity {
    fn from(homo: HomoArg) -> Self {
        match homo {
            HomoArg::Homogeneous => Homogeneity::Homogeneous,
            HomoArg::Heterogeneous => Homogeneity::Heterogeneous,
        }
    }
}

impl fmt::Display for HomoArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Homogeneity::from(*self))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    PiecewiseAffine,
    PowerLaw,
}

#[derive(clap::Args)]
pub struct GenerateArgs {
    /// Number of houses.
    #[arg(long)]
    pub houses: usize,
    /// Scheduling freedom of the shiftable appliances.
    #[arg(long, value_enum)]
    pub flexibility: FlexArg,
    /// Per-house window offsets instead of identical houses.
    #[arg(long)]
    pub heterogeneous: bool,
    /// Tariff threshold as a fraction of the group's maximum peak
    /// (0.25, 0.30, 0.35, 0.40 or 1.00).
    #[arg(long, default_value_t = 1.00)]
    pub ttf: f64,
    /// Integer multiple of the minimum tariff slope.
    #[arg(long = "slope-mult", default_value_t = 1)]
    pub slope_mult: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scenario file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args)]
pub struct RunArgs {
    /// Scenario file to solve.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value = "sa")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "roundrobin")]
    pub order: OrderArg,
    #[arg(long, value_enum, default_value = "greedy")]
    pub init: InitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pass budget; defaults to 10 times the player count.
    #[arg(long = "max-passes")]
    pub max_passes: Option<usize>,
    /// Minimum saving (EUR) for a strategy switch.
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon: f64,
    /// Directory for summary.csv, profile.csv, trace.csv, final_starts.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Label for the summary row; defaults to the scenario file stem.
    #[arg(long)]
    pub label: Option<String>,
    /// Exit nonzero when the dynamics does not converge.
    #[arg(long)]
    pub strict: bool,
    /// Provenance metadata recorded in summary.csv (informational).
    #[arg(long)]
    pub flexibility: Option<String>,
    #[arg(long)]
    pub homogeneity: Option<String>,
    #[arg(long)]
    pub ttf: Option<String>,
    #[arg(long = "slope-mult")]
    pub slope_mult: Option<String>,
}

#[derive(clap::Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Game whose equilibria are enumerated.
    #[arg(long, value_enum, default_value = "sa")]
    pub mode: ModeArg,
    /// Refusal threshold on the raw strategy-space product.
    #[arg(long, default_value_t = gridsched_core::DEFAULT_PROFILE_CEILING)]
    pub ceiling: u64,
    /// Where to write the oracle report (JSON); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cross-check an engine run: directory containing final_starts.csv and
    /// summary.csv written by `gridsched run`.
    #[arg(long)]
    pub verify: Option<PathBuf>,
    /// Epsilon for the fallback equilibrium check during --verify.
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon: f64,
}

#[derive(clap::Args)]
pub struct CheckPricingArgs {
    /// Scenario file whose tariff is certified.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Inline tariff instead of a scenario file.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long = "c-min")]
    pub c_min: Option<f64>,
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long = "threshold-kw")]
    pub threshold_kw: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Demand range scanned, kW.
    #[arg(long = "range-lo", default_value_t = 0.0)]
    pub range_lo: f64,
    /// Upper end of the scan; defaults to the scenario's total supply limit.
    #[arg(long = "range-hi")]
    pub range_hi: Option<f64>,
    /// Sampled interval pairs for the paired-derivative condition.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Where to write the report (JSON); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit nonzero on verdict `violated`.
    #[arg(long)]
    pub strict: bool,
}

#[derive(clap::Args)]
pub struct ExperimentArgs {
    /// Output directory; one subdirectory per cell plus a combined summary.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 20])]
    pub houses: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![FlexArg::Fix, FlexArg::Short, FlexArg::Long])]
    pub flexibility: Vec<FlexArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![HomoArg::Homogeneous])]
    pub homogeneity: Vec<HomoArg>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.00])]
    pub ttf: Vec<f64>,
    #[arg(long = "slope-mult", value_delimiter = ',', default_values_t = vec![1])]
    pub slope_mult: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3])]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![ModeArg::Sa, ModeArg::Ma])]
    pub modes: Vec<ModeArg>,
    /// Pass budget per run; defaults to 10 times the player count.
    #[arg(long = "max-passes")]
    pub max_passes: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon: f64,
}
