//! Evaluation metrics for solved instances: social cost, aggregate peak
//! demand, and Jain's fairness index over per-house bills.

use std::collections::BTreeMap;

use crate::model::StrategyProfile;
use crate::pricing::{house_bill_given_total, social_cost, Tariff};

/// The evaluation metrics of one profile in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub social_cost_eur: f64,
    pub peak_demand_kw: f64,
    /// Jain's index over per-house bills; 1 means everyone pays the same.
    pub jain_index: f64,
    /// Aggregate demand per slot, kW.
    pub aggregate_profile_kw: Vec<f64>,
    pub per_house_bills_eur: BTreeMap<String, f64>,
}

/// Maximum aggregate demand over all slots.
pub fn peak_demand(profile: &StrategyProfile<'_>) -> f64 {
    profile.total_demand().into_iter().fold(0.0, f64::max)
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`.
///
/// Lies in `[1/n, 1]` and equals 1 iff all values are equal. An empty or
/// all-zero input is perfectly equal by convention and yields 1.
pub fn jain_index(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 1.0;
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return 1.0;
    }
    (sum * sum) / (n as f64 * sum_sq)
}

/// Computes every metric of a profile under a tariff.
pub fn summarize(profile: &StrategyProfile<'_>, tariff: &Tariff) -> MetricsSummary {
    let aggregate = profile.total_demand();
    let peak = aggregate.iter().copied().fold(0.0, f64::max);
    let scenario = profile.scenario();
    let mut bills = BTreeMap::new();
    for (h, house) in scenario.houses.iter().enumerate() {
        bills.insert(
            house.id.clone(),
            house_bill_given_total(profile, h, tariff, &aggregate),
        );
    }
    let bill_values: Vec<f64> = bills.values().copied().collect();
    MetricsSummary {
        social_cost_eur: social_cost(profile, tariff),
        peak_demand_kw: peak,
        jain_index: jain_index(&bill_values),
        aggregate_profile_kw: aggregate,
        per_house_bills_eur: bills,
    }
}
