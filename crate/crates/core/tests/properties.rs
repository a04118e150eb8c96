//! Property tests for the structural invariants: demand placement and
//! superposition, supply-limit feasibility, tariff monotonicity and scaling,
//! fairness-index bounds, and scenario file round-trips.

use proptest::prelude::*;

use gridsched_core::engine::{initialize, run_dynamics, DynamicsConfig, GameMode, InitPolicy};
use gridsched_core::metrics::jain_index;
use gridsched_core::model::{appliance_demand, Appliance, Scenario, TimeGrid};
use gridsched_core::pricing::{social_cost, Tariff};
use gridsched_core::scenario::{
    generate, load, save, Flexibility, GenerationSpec, Homogeneity, TARIFF_THRESHOLD_FRACTIONS,
};

fn generation_spec() -> impl Strategy<Value = GenerationSpec> {
    (
        1usize..=6,
        0usize..3,
        any::<bool>(),
        0usize..TARIFF_THRESHOLD_FRACTIONS.len(),
        1u32..=4,
        any::<u64>(),
    )
        .prop_map(|(houses, flex, hetero, ttf, slope, seed)| GenerationSpec {
            num_houses: houses,
            flexibility: [Flexibility::Fix, Flexibility::Short, Flexibility::Long][flex],
            homogeneity: if hetero {
                Homogeneity::Heterogeneous
            } else {
                Homogeneity::Homogeneous
            },
            tariff_threshold_fraction: TARIFF_THRESHOLD_FRACTIONS[ttf],
            slope_multiplier: slope,
            seed,
        })
}

/// A random feasible profile of a generated scenario. Random placement can
/// paint itself into a corner (it fails loudly by contract); fall back to the
/// guaranteed greedy placement in that case.
fn random_profile(scenario: &Scenario, seed: u64) -> gridsched_core::StrategyProfile<'_> {
    let config = DynamicsConfig {
        init_policy: InitPolicy::RandomFeasible,
        seed,
        ..DynamicsConfig::default()
    };
    initialize(scenario, &config).unwrap_or_else(|_| {
        initialize(scenario, &DynamicsConfig::default()).expect("greedy placement succeeds")
    })
}

proptest! {
    #[test]
    fn appliance_demand_places_exactly_the_phases(
        phases in proptest::collection::vec(0.0f64..3.0, 1..=4),
        slot_count in 6usize..=12,
        offset in 0usize..=8,
    ) {
        let duration = phases.len();
        prop_assume!(duration <= slot_count);
        let start = 1 + offset % (slot_count - duration + 1);
        let appliance = Appliance::shiftable("a", phases.clone(), 1, slot_count);
        let grid = TimeGrid::new(slot_count, 1.0);
        let demand = appliance_demand(&appliance, start, &grid).unwrap();
        for (t, &value) in demand.iter().enumerate() {
            let slot = t + 1;
            if slot >= start && slot < start + duration {
                prop_assert_eq!(value, phases[slot - start]);
            } else {
                prop_assert_eq!(value, 0.0);
            }
        }
        let placed: f64 = demand.iter().sum();
        let total: f64 = phases.iter().sum();
        prop_assert!((placed - total).abs() <= 1e-12 * total.max(1.0));
    }

    #[test]
    fn total_demand_superposes_house_demands(spec in generation_spec(), profile_seed in any::<u64>()) {
        let scenario = generate(&spec).unwrap();
        let profile = random_profile(&scenario, profile_seed);
        let total = profile.total_demand();
        let mut summed = vec![0.0; total.len()];
        for house in &scenario.houses {
            for (t, v) in profile.house_demand(&house.id).unwrap().iter().enumerate() {
                summed[t] += v;
            }
        }
        for (&a, &b) in total.iter().zip(&summed) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn feasible_starts_preserve_the_supply_limit(spec in generation_spec(), profile_seed in any::<u64>()) {
        let scenario = generate(&spec).unwrap();
        let profile = random_profile(&scenario, profile_seed);
        profile.check_supply_limits().unwrap();
        for (player, _) in profile.assignments() {
            for start in profile.feasible_starts(&player).unwrap() {
                let moved = profile.with_start(&player, start).unwrap();
                prop_assert!(moved.check_supply_limits().is_ok());
            }
        }
    }

    #[test]
    fn price_is_monotone_and_continuous_at_the_threshold(
        c_min in 0.0f64..1e-3,
        slope in 0.0f64..1e-6,
        threshold in 1.0f64..100.0,
        y_lo in 0.0f64..200.0,
        delta in 0.0f64..200.0,
    ) {
        let tariff = Tariff::piecewise_affine(c_min, slope, threshold);
        let lo = tariff.price_at(y_lo).unwrap();
        let hi = tariff.price_at(y_lo + delta).unwrap();
        prop_assert!(hi >= lo - 1e-18);
        let below = tariff.price_at(threshold * (1.0 - 1e-12)).unwrap();
        let at = tariff.price_at(threshold).unwrap();
        prop_assert!((at - below).abs() <= 1e-12);
    }

    #[test]
    fn jain_index_is_bounded_and_scale_invariant(
        values in proptest::collection::vec(0.0f64..100.0, 1..=16),
        factor in 1e-3f64..1e3,
    ) {
        let n = values.len() as f64;
        let jfi = jain_index(&values);
        prop_assert!(jfi >= 1.0 / n - 1e-9);
        prop_assert!(jfi <= 1.0 + 1e-9);
        let scaled: Vec<f64> = values.iter().map(|v| v * factor).collect();
        prop_assert!((jain_index(&scaled) - jfi).abs() <= 1e-9);
    }

    #[test]
    fn binary_tariff_scaling_is_exact_and_argmin_invariant(
        spec in generation_spec(),
        power in -2i32..=2,
    ) {
        let factor = 2.0f64.powi(power);
        let scenario = generate(&spec).unwrap();
        let scaled = Scenario::new(
            scenario.grid.clone(),
            scenario.tariff.scaled(factor),
            scenario.houses.clone(),
        );
        let config = DynamicsConfig::new(GameMode::SingleAppliance);
        let base_run = run_dynamics(&scenario, &config).unwrap();
        let scaled_run = run_dynamics(&scaled, &config).unwrap();
        prop_assert_eq!(
            base_run.final_profile.start_slots(),
            scaled_run.final_profile.start_slots()
        );
        // Powers of two scale every cost bit-exactly.
        let base_cost = social_cost(&base_run.final_profile, &scenario.tariff);
        let scaled_cost = social_cost(&scaled_run.final_profile, &scaled.tariff);
        prop_assert_eq!(factor * base_cost, scaled_cost);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scenario_files_round_trip(spec in generation_spec()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        let scenario = generate(&spec).unwrap();
        save(&scenario, &path).unwrap();
        let loaded = load(&path).unwrap();
        prop_assert_eq!(&loaded, &scenario);
        let path2 = dir.path().join("scenario2.json");
        save(&loaded, &path2).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }
}
