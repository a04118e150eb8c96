//! Brute-force ground truth on small instances: exhaustive enumeration of
//! every feasible profile, the global optimum, the set of pure equilibria,
//! and cross-checks of engine results against them.
//!
//! Exists for desk-scale verification only; the enumeration refuses instances
//! whose raw strategy-space product exceeds a ceiling.

use std::sync::Arc;

use serde::Serialize;

use crate::engine::{feasible_house_assignments, is_nash, EquilibriumResult, GameMode};
use crate::model::{validate_scenario, PlayerId, Scenario, StrategyProfile, ValidationReport};
use crate::pricing::social_cost;

/// Default cap on the raw product of all shiftable windows.
pub const DEFAULT_PROFILE_CEILING: u64 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("strategy space of {product} profiles exceeds the enumeration ceiling of {ceiling}")]
    CeilingExceeded { product: u128, ceiling: u64 },
    #[error("scenario is invalid:\n{0}")]
    InvalidScenario(ValidationReport),
}

/// One equilibrium profile found by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashProfile {
    pub starts: Vec<(PlayerId, usize)>,
    pub social_cost_eur: f64,
}

/// Ground truth for one instance.
#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    /// Game the equilibrium set refers to (unilateral vs joint deviations).
    pub mode: GameModeTag,
    pub optimum_cost_eur: f64,
    /// Every profile achieving the optimum exactly.
    pub optimum_profiles: Vec<Vec<(PlayerId, usize)>>,
    /// Every pure equilibrium (exact check, zero epsilon), with its cost.
    pub nash_profiles: Vec<NashProfile>,
    /// Worst equilibrium cost over the optimum; absent when no equilibrium
    /// was found.
    pub price_of_anarchy: Option<f64>,
    pub profile_count_enumerated: u64,
}

/// Serializable tag mirroring [`GameMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GameModeTag {
    Sa,
    Ma,
}

impl From<GameMode> for GameModeTag {
    fn from(mode: GameMode) -> Self {
        match mode {
            GameMode::SingleAppliance => GameModeTag::Sa,
            GameMode::MultiAppliance => GameModeTag::Ma,
        }
    }
}

/// Streaming enumeration of every feasible profile, lexicographic over
/// (canonical player order, ascending start slots).
pub struct ProfileEnumeration<'s> {
    scenario: &'s Scenario,
    index: Arc<crate::model::ProfileIndex>,
    /// Feasible joint assignments per house, lexicographically ordered.
    per_house: Vec<Vec<Vec<usize>>>,
    odometer: Vec<usize>,
    exhausted: bool,
}

impl<'s> Iterator for ProfileEnumeration<'s> {
    type Item = StrategyProfile<'s>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.exhausted {
            return None;
        }
        let mut starts = Vec::with_capacity(self.scenario.player_count());
        for (h, &pick) in self.odometer.iter().enumerate() {
            starts.extend_from_slice(&self.per_house[h][pick]);
        }
        // Advance the odometer, last house fastest.
        let mut pos = self.odometer.len();
        loop {
            if pos == 0 {
                self.exhausted = true;
                break;
            }
            pos -= 1;
            self.odometer[pos] += 1;
            if self.odometer[pos] < self.per_house[pos].len() {
                break;
            }
            self.odometer[pos] = 0;
        }
        Some(StrategyProfile::from_parts(
            self.scenario,
            Arc::clone(&self.index),
            starts,
        ))
    }
}

/// Raw size of the strategy space: the product of all shiftable windows,
/// before supply-limit pruning.
pub fn strategy_space_size(scenario: &Scenario) -> u128 {
    let mut product: u128 = 1;
    for house in &scenario.houses {
        for appliance in &house.appliances {
            if appliance.kind == crate::model::ApplianceKind::Shiftable {
                let width = appliance
                    .last_start()
                    .map(|last| last + 1 - appliance.earliest_start)
                    .unwrap_or(0) as u128;
                product = product.saturating_mul(width.max(1));
            }
        }
    }
    product
}

/// Streams every supply-limit-feasible profile exactly once. Refuses when the
/// raw window product exceeds `ceiling`.
pub fn enumerate_profiles<'s>(
    scenario: &'s Scenario,
    ceiling: u64,
) -> Result<ProfileEnumeration<'s>, OracleError> {
    let report = validate_scenario(scenario);
    if !report.is_valid() {
        return Err(OracleError::InvalidScenario(report));
    }
    let product = strategy_space_size(scenario);
    if product > ceiling as u128 {
        return Err(OracleError::CeilingExceeded { product, ceiling });
    }
    let per_house: Vec<Vec<Vec<usize>>> = (0..scenario.houses.len())
        .map(|h| feasible_house_assignments(scenario, h))
        .collect();
    let exhausted = per_house.iter().any(|a| a.is_empty());
    let odometer = vec![0; scenario.houses.len()];
    Ok(ProfileEnumeration {
        scenario,
        index: StrategyProfile::build_index(scenario),
        per_house,
        odometer,
        exhausted,
    })
}

/// Exhaustive ground truth: global optimum, all pure equilibria of the given
/// game mode (exact deviation checks), and the price of anarchy.
pub fn brute_force(
    scenario: &Scenario,
    mode: GameMode,
    ceiling: u64,
) -> Result<OracleResult, OracleError> {
    let tariff = &scenario.tariff;
    let mut optimum = f64::INFINITY;
    let mut optimum_profiles: Vec<Vec<(PlayerId, usize)>> = Vec::new();
    let mut nash_profiles: Vec<NashProfile> = Vec::new();
    let mut count: u64 = 0;

    for profile in enumerate_profiles(scenario, ceiling)? {
        count += 1;
        let cost = social_cost(&profile, tariff);
        if cost < optimum {
            optimum = cost;
            optimum_profiles.clear();
            optimum_profiles.push(profile.assignments());
        } else if cost == optimum {
            optimum_profiles.push(profile.assignments());
        }
        if is_nash(&profile, tariff, mode, 0.0).is_nash {
            nash_profiles.push(NashProfile {
                starts: profile.assignments(),
                social_cost_eur: cost,
            });
        }
    }

    if count == 0 {
        // No feasible profile at all (or no players and infeasible fixed
        // load): report an empty result rather than inventing numbers.
        return Ok(OracleResult {
            mode: mode.into(),
            optimum_cost_eur: f64::INFINITY,
            optimum_profiles,
            nash_profiles,
            price_of_anarchy: None,
            profile_count_enumerated: 0,
        });
    }

    let price_of_anarchy = nash_profiles
        .iter()
        .map(|p| p.social_cost_eur)
        .fold(None, |acc: Option<f64>, c| {
            Some(acc.map_or(c, |a| a.max(c)))
        })
        .map(|worst| {
            if optimum > 0.0 {
                worst / optimum
            } else if worst == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        });

    Ok(OracleResult {
        mode: mode.into(),
        optimum_cost_eur: optimum,
        optimum_profiles,
        nash_profiles,
        price_of_anarchy,
        profile_count_enumerated: count,
    })
}

/// How an engine result relates to the oracle's ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    /// Final profile is in the oracle's exact equilibrium set.
    Verified,
    /// Not in the exact set, but no deviation beats the engine's epsilon.
    EpsilonOnly,
    /// A profitable deviation exists beyond the engine's epsilon.
    Failed,
    /// The engine did not converge; membership is not meaningful.
    Inconclusive,
}

/// Outcome of [`verify_engine`].
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub status: VerificationStatus,
    pub in_exact_nash_set: bool,
    pub nash_set_size: usize,
    pub optimum_cost_eur: f64,
    pub final_cost_eur: f64,
    /// Final social cost over the oracle optimum.
    pub cost_ratio_to_optimum: Option<f64>,
}

/// Cross-checks a converged engine run against the oracle: membership in the
/// equilibrium set of the run's own game mode, and distance from the optimum.
pub fn verify_engine(
    scenario: &Scenario,
    result: &EquilibriumResult<'_>,
    epsilon: f64,
    ceiling: u64,
) -> Result<VerificationReport, OracleError> {
    verify_profile(
        scenario,
        &result.final_profile,
        result.mode,
        result.converged,
        epsilon,
        ceiling,
    )
}

/// [`verify_engine`] for a profile reconstructed outside the engine (e.g.
/// re-read from a result file); `converged` mirrors the run's outcome.
pub fn verify_profile(
    scenario: &Scenario,
    profile: &StrategyProfile<'_>,
    mode: GameMode,
    converged: bool,
    epsilon: f64,
    ceiling: u64,
) -> Result<VerificationReport, OracleError> {
    let final_cost = social_cost(profile, &scenario.tariff);
    if !converged {
        return Ok(VerificationReport {
            status: VerificationStatus::Inconclusive,
            in_exact_nash_set: false,
            nash_set_size: 0,
            optimum_cost_eur: f64::NAN,
            final_cost_eur: final_cost,
            cost_ratio_to_optimum: None,
        });
    }
    let oracle = brute_force(scenario, mode, ceiling)?;
    let final_assignments = profile.assignments();
    let in_exact_nash_set = oracle
        .nash_profiles
        .iter()
        .any(|p| p.starts == final_assignments);
    let status = if in_exact_nash_set {
        VerificationStatus::Verified
    } else if is_nash(profile, &scenario.tariff, mode, epsilon).is_nash {
        VerificationStatus::EpsilonOnly
    } else {
        VerificationStatus::Failed
    };
    let ratio = if oracle.optimum_cost_eur > 0.0 {
        Some(final_cost / oracle.optimum_cost_eur)
    } else if final_cost == 0.0 {
        Some(1.0)
    } else {
        None
    };
    Ok(VerificationReport {
        status,
        in_exact_nash_set,
        nash_set_size: oracle.nash_profiles.len(),
        optimum_cost_eur: oracle.optimum_cost_eur,
        final_cost_eur: final_cost,
        cost_ratio_to_optimum: ratio,
    })
}
