//! gridsched: a simulator and solver for distributed demand-side management
//! scheduling games.
//!
//! Households own phase-based appliances whose start times are decision
//! variables; energy prices rise with the group's aggregate demand, so each
//! appliance (or each whole house, in joint mode) repeatedly switches to its
//! cheapest feasible schedule until nobody wants to move. The crate provides:
//!
//! - [`model`] — scenarios, appliances, strategy profiles, demand derivation
//!   and feasibility under per-house supply limits;
//! - [`pricing`] — demand-dependent tariffs, player/social cost, the potential
//!   diagnostic, and a numerical regularity certifier;
//! - [`engine`] — sequential best-response dynamics with convergence, cycle
//!   detection and potential tracing, plus equilibrium checks;
//! - [`oracle`] — brute-force enumeration of small instances: global optimum,
//!   all pure equilibria, price of anarchy, engine verification;
//! - [`metrics`] — social cost, peak demand and Jain's fairness index;
//! - [`scenario`] — seeded synthetic scenario generation and scenario files.

pub mod engine;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod scenario;

pub use engine::{
    best_response, initialize, is_nash, ma_best_response, run_dynamics, DynamicsConfig,
    EquilibriumResult, GameMode, InitPolicy, OrderPolicy,
};
pub use metrics::{jain_index, peak_demand, summarize, MetricsSummary};
pub use model::{
    appliance_demand, validate_scenario, Appliance, ApplianceKind, House, PlayerId, Scenario,
    StrategyProfile, TimeGrid, ValidationReport,
};
pub use oracle::{
    brute_force, enumerate_profiles, verify_engine, verify_profile, OracleResult,
    VerificationReport, VerificationStatus, DEFAULT_PROFILE_CEILING,
};
pub use pricing::{
    check_regularity, house_bill, player_cost, potential, social_cost, PricingFunction,
    RegularityReport, RegularityVerdict, Tariff,
};
pub use scenario::{generate, load, save, Flexibility, GenerationSpec, Homogeneity};
