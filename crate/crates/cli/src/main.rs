//! `gridsched` binary: generate scenarios, run best-response dynamics,
//! brute-force small instances, certify tariffs, and drive experiment sweeps.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 infeasible scenario,
//! 5 strict-mode failure, 1 anything else.

mod args;
mod commands;
mod output;

use clap::Parser;
use gridsched_core::engine::EngineError;
use gridsched_core::oracle::OracleError;
use gridsched_core::scenario::ScenarioError;

#[derive(Debug)]
pub enum CliError {
    /// Bad inputs: parse failures, invariant violations, domain errors.
    Validation(String),
    /// The scenario admits no feasible schedule.
    Infeasible(String),
    /// A `--strict` condition fired.
    Strict(String),
    /// IO and other environment failures.
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Strict(_) => 5,
            CliError::Other(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m)
            | CliError::Infeasible(m)
            | CliError::Strict(m)
            | CliError::Other(m) => m,
        }
    }

    pub fn from_io(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }

    pub fn from_csv(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }

    pub fn from_other(e: impl std::fmt::Display) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(io) => CliError::Other(io.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidScenario(_) => CliError::Validation(e.to_string()),
            EngineError::InfeasibleScenario { .. } | EngineError::InfeasibleFixedLoad { .. } => {
                CliError::Infeasible(e.to_string())
            }
            EngineError::Model(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn main() {
    let cli = args::Cli::parse();
    let outcome = match &cli.command {
        args::Command::Generate(a) => commands::cmd_generate(a),
        args::Command::Run(a) => commands::cmd_run(a),
        args::Command::Oracle(a) => commands::cmd_oracle(a),
        args::Command::CheckPricing(a) => commands::cmd_check_pricing(a),
        args::Command::Experiment(a) => commands::cmd_experiment(a),
    };
    if let Err(e) = outcome {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
