//! Demand-dependent pricing: the saturating affine tariff used by the
//! experiment battery, the power-law family, per-player and social cost, and
//! a numerical certifier for the regularity conditions the convergence
//! guarantees rest on.
//!
//! Prices are in EUR per kWh; per-slot energy is power (kW) times the slot
//! duration (hours), so costs come out in EUR.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{ModelError, PlayerId, StrategyProfile};

#[derive(Debug, thiserror::Error)]
pub enum PricingError {
    #[error("demand must be non-negative, got {0}")]
    NegativeDemand(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A single pricing rule mapping aggregate demand (kW) to a price (EUR/kWh).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PricingFunction {
    /// Affine in demand up to a threshold, constant beyond it:
    /// `c_min + slope * min(y, threshold_kw)`.
    PiecewiseAffine {
        c_min: f64,
        slope: f64,
        threshold_kw: f64,
    },
    /// `alpha * y^beta` with `alpha > 0`, `beta >= 1`.
    PowerLaw { alpha: f64, beta: f64 },
}

impl PricingFunction {
    fn eval(&self, demand_kw: f64) -> f64 {
        match *self {
            PricingFunction::PiecewiseAffine {
                c_min,
                slope,
                threshold_kw,
            } => {
                if demand_kw < threshold_kw {
                    c_min + slope * demand_kw
                } else {
                    c_min + slope * threshold_kw
                }
            }
            PricingFunction::PowerLaw { alpha, beta } => alpha * demand_kw.powf(beta),
        }
    }

    fn invariant_violations(&self, out: &mut Vec<String>) {
        match *self {
            PricingFunction::PiecewiseAffine {
                c_min,
                slope,
                threshold_kw,
            } => {
                if c_min < 0.0 || !c_min.is_finite() {
                    out.push("c_min must be non-negative and finite".into());
                }
                if slope < 0.0 || !slope.is_finite() {
                    out.push("slope must be non-negative and finite".into());
                }
                if threshold_kw <= 0.0 || !threshold_kw.is_finite() {
                    out.push("threshold_kw must be positive and finite".into());
                }
            }
            PricingFunction::PowerLaw { alpha, beta } => {
                if alpha <= 0.0 || !alpha.is_finite() {
                    out.push("alpha must be positive and finite".into());
                }
                if beta < 1.0 || !beta.is_finite() {
                    out.push("beta must be at least 1 and finite".into());
                }
            }
        }
    }
}

/// A tariff: one pricing rule applied at every slot, optionally overridden
/// for individual slots. All bundled scenarios use the uniform form.
#[derive(Debug, Clone, PartialEq)]
pub struct Tariff {
    base: PricingFunction,
    per_slot: BTreeMap<usize, PricingFunction>,
}

impl Tariff {
    /// A time-invariant tariff: the same rule at every slot.
    pub fn uniform(base: PricingFunction) -> Self {
        Self {
            base,
            per_slot: BTreeMap::new(),
        }
    }

    /// The experiment battery's saturating affine tariff.
    pub fn piecewise_affine(c_min: f64, slope: f64, threshold_kw: f64) -> Self {
        Self::uniform(PricingFunction::PiecewiseAffine {
            c_min,
            slope,
            threshold_kw,
        })
    }

    /// The regular power-law tariff `alpha * y^beta`.
    pub fn power_law(alpha: f64, beta: f64) -> Self {
        Self::uniform(PricingFunction::PowerLaw { alpha, beta })
    }

    /// Overrides the pricing rule of one slot (1-based).
    pub fn with_slot_override(mut self, slot: usize, rule: PricingFunction) -> Self {
        self.per_slot.insert(slot, rule);
        self
    }

    pub fn base(&self) -> &PricingFunction {
        &self.base
    }

    /// True when no per-slot overrides are present.
    pub fn is_time_invariant(&self) -> bool {
        self.per_slot.is_empty()
    }

    /// Price for aggregate demand `demand_kw` under the base (uniform) rule.
    pub fn price_at(&self, demand_kw: f64) -> Result<f64, PricingError> {
        if demand_kw < 0.0 || demand_kw.is_nan() {
            return Err(PricingError::NegativeDemand(demand_kw));
        }
        Ok(self.base.eval(demand_kw))
    }

    /// Price at a specific slot, honoring per-slot overrides.
    pub fn price_at_slot(&self, slot: usize, demand_kw: f64) -> Result<f64, PricingError> {
        if demand_kw < 0.0 || demand_kw.is_nan() {
            return Err(PricingError::NegativeDemand(demand_kw));
        }
        Ok(self.rule_for_slot(slot).eval(demand_kw))
    }

    fn rule_for_slot(&self, slot: usize) -> &PricingFunction {
        self.per_slot.get(&slot).unwrap_or(&self.base)
    }

    /// Evaluation without the non-negativity gate, for internal cost paths
    /// operating on derived (hence non-negative) demand vectors.
    pub(crate) fn eval_slot(&self, slot: usize, demand_kw: f64) -> f64 {
        debug_assert!(demand_kw >= 0.0);
        self.rule_for_slot(slot).eval(demand_kw)
    }

    /// New tariff with every price parameter scaled by `factor` (affine
    /// `c_min`/`slope`, power-law `alpha`).
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |rule: &PricingFunction| match *rule {
            PricingFunction::PiecewiseAffine {
                c_min,
                slope,
                threshold_kw,
            } => PricingFunction::PiecewiseAffine {
                c_min: factor * c_min,
                slope: factor * slope,
                threshold_kw,
            },
            PricingFunction::PowerLaw { alpha, beta } => PricingFunction::PowerLaw {
                alpha: factor * alpha,
                beta,
            },
        };
        Self {
            base: scale(&self.base),
            per_slot: self
                .per_slot
                .iter()
                .map(|(&t, rule)| (t, scale(rule)))
                .collect(),
        }
    }

    pub(crate) fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.base.invariant_violations(&mut out);
        for (slot, rule) in &self.per_slot {
            let mut slot_out = Vec::new();
            rule.invariant_violations(&mut slot_out);
            out.extend(
                slot_out
                    .into_iter()
                    .map(|m| format!("slot {slot} override: {m}")),
            );
        }
        out
    }
}

/// Total bill of one player: its own energy at each slot, charged at the
/// price set by the aggregate demand of that slot.
pub fn player_cost(
    profile: &StrategyProfile<'_>,
    player: &PlayerId,
    tariff: &Tariff,
) -> Result<f64, PricingError> {
    let idx = profile.player_index(player)?;
    Ok(player_cost_by_index(profile, idx, tariff))
}

pub(crate) fn player_cost_by_index(
    profile: &StrategyProfile<'_>,
    player_index: usize,
    tariff: &Tariff,
) -> f64 {
    let scenario = profile.scenario();
    let (h, a) = profile.player_slot(player_index);
    let appliance = &scenario.houses[h].appliances[a];
    let start = profile.start_slots()[player_index];
    let total = profile.total_demand();
    let hours = scenario.grid.slot_duration_hours;
    let mut cost = 0.0;
    for (f, &load) in appliance.phase_loads_kw.iter().enumerate() {
        let t = start + f; // 1-based slot index
        cost += load * hours * tariff.eval_slot(t, total[t - 1]);
    }
    cost
}

/// Bill of one house: its demand at each slot, charged at the aggregate price.
pub fn house_bill(
    profile: &StrategyProfile<'_>,
    house_id: &str,
    tariff: &Tariff,
) -> Result<f64, PricingError> {
    let h = profile
        .scenario()
        .house_index(house_id)
        .ok_or_else(|| ModelError::UnknownHouse(house_id.to_string()))?;
    let total = profile.total_demand();
    Ok(house_bill_given_total(profile, h, tariff, &total))
}

pub(crate) fn house_bill_given_total(
    profile: &StrategyProfile<'_>,
    house_index: usize,
    tariff: &Tariff,
    total: &[f64],
) -> f64 {
    let hours = profile.scenario().grid.slot_duration_hours;
    let demand = profile.house_demand_by_index(house_index);
    demand
        .iter()
        .enumerate()
        .map(|(t, &d)| d * hours * tariff.eval_slot(t + 1, total[t]))
        .sum()
}

/// Social cost: sum of all house bills under the shared price vector.
pub fn social_cost(profile: &StrategyProfile<'_>, tariff: &Tariff) -> f64 {
    let total = profile.total_demand();
    (0..profile.scenario().houses.len())
        .map(|h| house_bill_given_total(profile, h, tariff, &total))
        .sum()
}

/// The dynamics' descent diagnostic. Numerically identical to
/// [`social_cost`]; exposed under its own name so equilibrium traces are
/// self-documenting.
pub fn potential(profile: &StrategyProfile<'_>, tariff: &Tariff) -> f64 {
    social_cost(profile, tariff)
}

/// Verdict of the numerical regularity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityVerdict {
    /// Monotone, smooth, and no sampled violation of the paired-interval
    /// derivative condition.
    Regular,
    /// Price does not respond to demand at all; the conditions hold only
    /// vacuously.
    Degenerate,
    /// Non-monotone, derivative discontinuity, or a sampled violation.
    Violated,
}

impl std::fmt::Display for RegularityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RegularityVerdict::Regular => write!(f, "regular"),
            RegularityVerdict::Degenerate => write!(f, "degenerate"),
            RegularityVerdict::Violated => write!(f, "violated"),
        }
    }
}

/// Outcome of [`check_regularity`].
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub monotone: bool,
    pub derivative_continuous: bool,
    /// Demand levels where a derivative jump was detected.
    pub discontinuities: Vec<f64>,
    pub condition2_samples_checked: usize,
    pub condition2_violated: usize,
    pub verdict: RegularityVerdict,
}

/// Finite-difference step divisor and strictness margin of the certifier.
const FD_STEP_DIVISOR: f64 = 1e4;
const STRICTNESS_MARGIN: f64 = 1e-12;

/// Numerically certifies a tariff against the two regularity conditions over
/// `demand_range`:
///
/// 1. the price is non-decreasing with a continuous derivative, checked by a
///    monotonicity scan and a two-scale finite-difference jump detector;
/// 2. for sampled same-length interval pairs with a sampled demand level per
///    interval, a strictly larger summed price derivative must come with a
///    strictly larger summed derivative of `y * c(y)`.
///
/// Derivatives are central finite differences with step `range / 10^4`; all
/// strict comparisons use a `1e-12` margin.
pub fn check_regularity(
    tariff: &Tariff,
    demand_range: (f64, f64),
    sample_count: usize,
) -> RegularityReport {
    assert!(sample_count >= 2, "sample_count must be at least 2");
    let (lo, hi) = demand_range;
    assert!(
        hi > lo && lo >= 0.0,
        "demand range must be non-empty and non-negative"
    );

    let range = hi - lo;
    let h = range / FD_STEP_DIVISOR;
    let price = |y: f64| tariff.base().eval(y.max(0.0));
    let deriv = |y: f64| (price(y + h) - price(y - h)) / (2.0 * h);
    let product_deriv = |y: f64| {
        let a = y - h;
        let b = y + h;
        (b * price(b) - a * price(a)) / (2.0 * h)
    };
    let sided_jump = |y: f64, step: f64| {
        let p = price(y);
        let left = (p - price(y - step)) / step;
        let right = (price(y + step) - p) / step;
        (right - left).abs()
    };

    // Condition 1: monotonicity and derivative continuity, walking the
    // interior of the range at the finite-difference step so that any jump
    // point gets bracketed (probes need y +- 2h inside the range).
    let grid_lo = lo + 2.0 * h;
    let grid_hi = hi - 2.0 * h;
    let steps = FD_STEP_DIVISOR as usize - 4;
    let mut monotone = true;
    let mut discontinuities: Vec<f64> = Vec::new();
    let mut max_abs_derivative: f64 = 0.0;
    let mut prev_price = price(grid_lo);
    for i in 0..=steps {
        let y = grid_lo + (grid_hi - grid_lo) * (i as f64) / (steps as f64);
        let p = price(y);
        if p < prev_price - STRICTNESS_MARGIN {
            monotone = false;
        }
        prev_price = p;
        max_abs_derivative = max_abs_derivative.max(deriv(y).abs());

        // A one-sided derivative mismatch that survives step refinement marks
        // a genuine jump; smooth curvature shrinks with the step instead. The
        // refinement rescans the bracket at h/64 to land next to the jump.
        let coarse = sided_jump(y, h);
        if coarse <= STRICTNESS_MARGIN {
            continue;
        }
        let mut fine_max = 0.0f64;
        let mut fine_at = y;
        for j in -64i32..=64 {
            let z = y + h * (j as f64) / 64.0;
            let fine = sided_jump(z, h / 64.0);
            if fine > fine_max {
                fine_max = fine;
                fine_at = z;
            }
        }
        if fine_max > 0.5 * coarse {
            let duplicate = discontinuities
                .last()
                .is_some_and(|&prev| (fine_at - prev).abs() <= 2.0 * h);
            if !duplicate {
                discontinuities.push(fine_at);
            }
        }
    }
    let derivative_continuous = discontinuities.is_empty();

    // Condition 2: seeded sampling of equal-length interval pairs, one demand
    // level per interval.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5ca1ab1e);
    let mut checked = 0;
    let mut violated = 0;
    for _ in 0..sample_count {
        let len = rng.gen_range(1..=4) as f64;
        let y_u: f64 = rng.gen_range(grid_lo..grid_hi);
        let y_v: f64 = rng.gen_range(grid_lo..grid_hi);
        let lhs_u = len * deriv(y_u);
        let lhs_v = len * deriv(y_v);
        if lhs_u > lhs_v + STRICTNESS_MARGIN {
            checked += 1;
            let rhs_u = len * product_deriv(y_u);
            let rhs_v = len * product_deriv(y_v);
            if rhs_u <= rhs_v + STRICTNESS_MARGIN {
                violated += 1;
            }
        }
    }

    let verdict = if !monotone || !derivative_continuous || violated > 0 {
        RegularityVerdict::Violated
    } else if max_abs_derivative <= STRICTNESS_MARGIN {
        RegularityVerdict::Degenerate
    } else {
        RegularityVerdict::Regular
    };

    RegularityReport {
        monotone,
        derivative_continuous,
        discontinuities,
        condition2_samples_checked: checked,
        condition2_violated: violated,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Appliance, House, Scenario, StrategyProfile, TimeGrid};
    use std::collections::BTreeMap;

    fn section_tariff() -> Tariff {
        Tariff::piecewise_affine(50e-6, 5.5e-9, 24.0)
    }

    #[test]
    fn price_at_zero_is_base_price() {
        assert_eq!(section_tariff().price_at(0.0).unwrap(), 50e-6);
    }

    #[test]
    fn price_below_threshold_is_affine() {
        let p = section_tariff().price_at(10.0).unwrap();
        assert!((p - (50e-6 + 5.5e-8)).abs() < 1e-18);
    }

    #[test]
    fn price_above_threshold_saturates() {
        let p = section_tariff().price_at(30.0).unwrap();
        assert!((p - (50e-6 + 5.5e-9 * 24.0)).abs() < 1e-18);
    }

    #[test]
    fn price_is_continuous_at_threshold() {
        let tariff = section_tariff();
        let threshold = 24.0;
        let below = tariff.price_at(threshold - 1e-9).unwrap();
        let at = tariff.price_at(threshold).unwrap();
        assert!((at - below).abs() <= 1e-12);
    }

    #[test]
    fn negative_demand_is_rejected() {
        assert!(section_tariff().price_at(-1.0).is_err());
        assert!(section_tariff().price_at_slot(1, -0.5).is_err());
    }

    #[test]
    fn per_slot_override_applies_only_to_its_slot() {
        let tariff = section_tariff().with_slot_override(
            3,
            PricingFunction::PowerLaw {
                alpha: 1.0,
                beta: 1.0,
            },
        );
        assert!(!tariff.is_time_invariant());
        assert_eq!(tariff.price_at_slot(3, 2.0).unwrap(), 2.0);
        assert_eq!(
            tariff.price_at_slot(2, 2.0).unwrap(),
            tariff.price_at(2.0).unwrap()
        );
    }

    fn single_player_scenario(tariff: Tariff, load: f64) -> Scenario {
        let house = House::new("h1", 5.0, vec![Appliance::shiftable("a", vec![load], 1, 2)]);
        Scenario::new(TimeGrid::new(2, 1.0), tariff, vec![house])
    }

    fn profile_at<'s>(
        scenario: &'s Scenario,
        starts: &[(&str, &str, usize)],
    ) -> StrategyProfile<'s> {
        let map: BTreeMap<PlayerId, usize> = starts
            .iter()
            .map(|(h, a, s)| (PlayerId::new(*h, *a), *s))
            .collect();
        StrategyProfile::new(scenario, &map).unwrap()
    }

    #[test]
    fn player_cost_single_appliance_single_slot() {
        let tariff = Tariff::piecewise_affine(50e-6, 1e-6, 1e9);
        let scenario = single_player_scenario(tariff.clone(), 2.0);
        let profile = profile_at(&scenario, &[("h1", "a", 1)]);
        let cost = player_cost(&profile, &PlayerId::new("h1", "a"), &tariff).unwrap();
        assert!((cost - 1.04e-4).abs() < 1e-15);
        // With one house and one appliance the social cost is that same term.
        assert_eq!(social_cost(&profile, &tariff), cost);
    }

    #[test]
    fn zero_load_player_pays_nothing() {
        let tariff = section_tariff();
        let scenario = single_player_scenario(tariff.clone(), 0.0);
        let profile = profile_at(&scenario, &[("h1", "a", 1)]);
        assert_eq!(
            player_cost(&profile, &PlayerId::new("h1", "a"), &tariff).unwrap(),
            0.0
        );
    }

    #[test]
    fn sharers_pay_their_own_load_at_the_common_price() {
        let tariff = Tariff::power_law(1.0, 1.0);
        let houses = vec![
            House::new("h1", 5.0, vec![Appliance::shiftable("a", vec![1.0], 1, 2)]),
            House::new("h2", 5.0, vec![Appliance::shiftable("a", vec![3.0], 1, 2)]),
        ];
        let scenario = Scenario::new(TimeGrid::new(2, 1.0), tariff.clone(), houses);
        let profile = profile_at(&scenario, &[("h1", "a", 1), ("h2", "a", 1)]);
        // Both pay the price of the aggregate demand (4 kW) times their own load.
        let c1 = player_cost(&profile, &PlayerId::new("h1", "a"), &tariff).unwrap();
        let c2 = player_cost(&profile, &PlayerId::new("h2", "a"), &tariff).unwrap();
        assert_eq!(c1, 4.0);
        assert_eq!(c2, 12.0);
        assert_eq!(social_cost(&profile, &tariff), 16.0);
    }

    #[test]
    fn social_cost_aligned_vs_anti_aligned() {
        let tariff = Tariff::power_law(1.0, 1.0);
        let houses = vec![
            House::new("h1", 3.0, vec![Appliance::shiftable("a", vec![1.0], 1, 2)]),
            House::new("h2", 3.0, vec![Appliance::shiftable("a", vec![1.0], 1, 2)]),
        ];
        let scenario = Scenario::new(TimeGrid::new(2, 1.0), tariff.clone(), houses);
        let aligned = profile_at(&scenario, &[("h1", "a", 1), ("h2", "a", 1)]);
        let anti = profile_at(&scenario, &[("h1", "a", 1), ("h2", "a", 2)]);
        assert_eq!(social_cost(&aligned, &tariff), 4.0);
        assert_eq!(social_cost(&anti, &tariff), 2.0);
    }

    #[test]
    fn empty_scenario_costs_nothing() {
        let tariff = section_tariff();
        let scenario = Scenario::new(TimeGrid::new(4, 1.0), tariff.clone(), vec![]);
        let profile = profile_at(&scenario, &[]);
        assert_eq!(social_cost(&profile, &tariff), 0.0);
    }

    #[test]
    fn potential_equals_social_cost() {
        let tariff = section_tariff();
        let scenario = single_player_scenario(tariff.clone(), 1.5);
        let profile = profile_at(&scenario, &[("h1", "a", 2)]);
        assert_eq!(potential(&profile, &tariff), social_cost(&profile, &tariff));
    }

    #[test]
    fn social_cost_equals_sum_of_house_bills_and_covers_fixed_load() {
        let tariff = section_tariff();
        let houses = vec![
            House::new(
                "h1",
                3.0,
                vec![
                    Appliance::shiftable("a", vec![1.0], 1, 3),
                    Appliance::fixed("f", vec![0.5], 2),
                ],
            ),
            House::new("h2", 3.0, vec![Appliance::fixed("f", vec![1.0, 1.0], 1)]),
        ];
        let scenario = Scenario::new(TimeGrid::new(3, 1.0), tariff.clone(), houses);
        let profile = profile_at(&scenario, &[("h1", "a", 3)]);
        let bills: f64 = ["h1", "h2"]
            .iter()
            .map(|h| house_bill(&profile, h, &tariff).unwrap())
            .sum();
        let total = social_cost(&profile, &tariff);
        assert_eq!(total, bills);
        // The players' own costs cover strictly less than the social cost;
        // the difference is exactly the fixed appliances' payments.
        let players_total = player_cost(&profile, &PlayerId::new("h1", "a"), &tariff).unwrap();
        assert!(players_total < total);
        let hours = 1.0;
        let agg = profile.total_demand();
        let fixed_payment: f64 = [(1, 0.5), (0, 1.0), (1, 1.0)]
            .iter()
            .map(|&(t, load): &(usize, f64)| load * hours * tariff.price_at(agg[t]).unwrap())
            .sum();
        assert!(((players_total + fixed_payment) - total).abs() <= 1e-9 * total.abs());
    }

    #[test]
    fn scaling_the_tariff_scales_costs_exactly_for_binary_factors() {
        let tariff = section_tariff();
        let scenario = single_player_scenario(tariff.clone(), 2.5);
        let profile = profile_at(&scenario, &[("h1", "a", 1)]);
        let base = social_cost(&profile, &tariff);
        for factor in [2.0, 0.25, 4.0] {
            let scaled = tariff.scaled(factor);
            assert_eq!(social_cost(&profile, &scaled), factor * base);
        }
    }

    #[test]
    fn regularity_power_law_is_regular() {
        let report = check_regularity(&Tariff::power_law(1.0, 1.0), (0.0, 60.0), 500);
        assert!(report.monotone);
        assert!(report.derivative_continuous);
        assert_eq!(report.condition2_violated, 0);
        assert_eq!(report.verdict, RegularityVerdict::Regular);

        let quadratic = check_regularity(&Tariff::power_law(0.5, 2.0), (0.0, 60.0), 500);
        assert_eq!(quadratic.verdict, RegularityVerdict::Regular);
    }

    #[test]
    fn regularity_flags_threshold_discontinuity() {
        let report = check_regularity(&section_tariff(), (0.0, 60.0), 500);
        assert_eq!(report.verdict, RegularityVerdict::Violated);
        assert!(!report.derivative_continuous);
        // The jump is located near the 24 kW threshold.
        assert!(report
            .discontinuities
            .iter()
            .any(|&y| (y - 24.0).abs() < 0.5));
    }

    #[test]
    fn regularity_constant_price_is_degenerate() {
        let flat = Tariff::piecewise_affine(50e-6, 0.0, 24.0);
        let report = check_regularity(&flat, (0.0, 60.0), 500);
        assert!(report.monotone);
        assert_eq!(report.condition2_violated, 0);
        assert_eq!(report.verdict, RegularityVerdict::Degenerate);
    }

    #[test]
    fn regularity_threshold_outside_range_passes() {
        // The 100% threshold variant never saturates inside the operating
        // range, so the scan sees a strictly increasing affine price.
        let report = check_regularity(&section_tariff(), (0.0, 20.0), 500);
        assert_eq!(report.verdict, RegularityVerdict::Regular);
    }
}
