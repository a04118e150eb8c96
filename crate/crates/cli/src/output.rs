//! Deterministic, diff-able output formatting: fixed column orders and floats
//! printed with 9 significant digits.

use std::path::Path;

use gridsched_core::engine::EquilibriumResult;
use gridsched_core::metrics::MetricsSummary;

use crate::CliError;

/// Formats a float with 9 significant digits, plain decimal notation where
/// the magnitude allows it and scientific notation otherwise.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = 8 - exponent;
    if (0..=17).contains(&decimals) && exponent <= 15 {
        format!("{:.*}", decimals as usize, x)
    } else {
        format!("{:.8e}", x)
    }
}

pub const SUMMARY_HEADER: [&str; 13] = [
    "scenario_label",
    "mode",
    "houses",
    "flexibility",
    "homogeneity",
    "ttf",
    "slope_mult",
    "seed",
    "social_cost_eur",
    "peak_kw",
    "jfi",
    "passes",
    "converged",
];

/// One row of `summary.csv`: run identity, provenance and headline metrics.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub scenario_label: String,
    pub mode: String,
    pub houses: usize,
    pub flexibility: String,
    pub homogeneity: String,
    pub ttf: String,
    pub slope_mult: String,
    pub seed: u64,
    pub social_cost_eur: f64,
    pub peak_kw: f64,
    pub jfi: f64,
    pub passes: usize,
    pub converged: bool,
}

impl SummaryRow {
    pub fn from_result(
        label: &str,
        result: &EquilibriumResult<'_>,
        summary: &MetricsSummary,
        seed: u64,
        provenance: &Provenance,
    ) -> Self {
        Self {
            scenario_label: label.to_string(),
            mode: result.mode.to_string(),
            houses: result.final_profile.scenario().houses.len(),
            flexibility: provenance.flexibility.clone(),
            homogeneity: provenance.homogeneity.clone(),
            ttf: provenance.ttf.clone(),
            slope_mult: provenance.slope_mult.clone(),
            seed,
            social_cost_eur: summary.social_cost_eur,
            peak_kw: summary.peak_demand_kw,
            jfi: summary.jain_index,
            passes: result.passes_used,
            converged: result.converged,
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.scenario_label.clone(),
            self.mode.clone(),
            self.houses.to_string(),
            self.flexibility.clone(),
            self.homogeneity.clone(),
            self.ttf.clone(),
            self.slope_mult.clone(),
            self.seed.to_string(),
            fmt_sig(self.social_cost_eur),
            fmt_sig(self.peak_kw),
            fmt_sig(self.jfi),
            self.passes.to_string(),
            self.converged.to_string(),
        ]
    }
}

/// Generation metadata carried into `summary.csv`; standalone runs that only
/// see a scenario file report `-` for the fields they cannot know.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub flexibility: String,
    pub homogeneity: String,
    pub ttf: String,
    pub slope_mult: String,
}

impl Default for Provenance {
    fn default() -> Self {
        Self {
            flexibility: "-".into(),
            homogeneity: "-".into(),
            ttf: "-".into(),
            slope_mult: "-".into(),
        }
    }
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(CliError::from_csv)?;
    writer
        .write_record(SUMMARY_HEADER)
        .map_err(CliError::from_csv)?;
    for row in rows {
        writer
            .write_record(row.record())
            .map_err(CliError::from_csv)?;
    }
    writer.flush().map_err(CliError::from_io)?;
    Ok(())
}

/// `profile.csv`: the aggregate demand series of the final profile.
pub fn write_profile_csv(path: &Path, aggregate_kw: &[f64]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(CliError::from_csv)?;
    writer
        .write_record(["slot", "aggregate_kw"])
        .map_err(CliError::from_csv)?;
    for (t, &kw) in aggregate_kw.iter().enumerate() {
        writer
            .write_record([(t + 1).to_string(), fmt_sig(kw)])
            .map_err(CliError::from_csv)?;
    }
    writer.flush().map_err(CliError::from_io)?;
    Ok(())
}

/// `trace.csv`: the potential trace, one row per accepted improvement plus
/// the initial snapshot.
pub fn write_trace_csv(path: &Path, result: &EquilibriumResult<'_>) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(CliError::from_csv)?;
    writer
        .write_record(["step", "actor", "old_cost", "new_cost", "potential"])
        .map_err(CliError::from_csv)?;
    for entry in &result.potential_trace {
        writer
            .write_record([
                entry.step.to_string(),
                entry.actor.clone().unwrap_or_default(),
                entry.old_cost_eur.map(fmt_sig).unwrap_or_default(),
                entry.new_cost_eur.map(fmt_sig).unwrap_or_default(),
                fmt_sig(entry.potential_eur),
            ])
            .map_err(CliError::from_csv)?;
    }
    writer.flush().map_err(CliError::from_io)?;
    Ok(())
}

/// `final_starts.csv`: the converged schedule, one row per shiftable
/// appliance. Input of `gridsched oracle --verify`.
pub fn write_final_starts_csv(path: &Path, result: &EquilibriumResult<'_>) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(CliError::from_csv)?;
    writer
        .write_record(["house_id", "appliance_id", "start_slot"])
        .map_err(CliError::from_csv)?;
    for (player, start) in result.final_profile.assignments() {
        writer
            .write_record([player.house_id, player.appliance_id, start.to_string()])
            .map_err(CliError::from_csv)?;
    }
    writer.flush().map_err(CliError::from_io)?;
    Ok(())
}
