//! Synthetic scenario generation and scenario file I/O.
//!
//! Generated scenarios follow the evaluation setup of the experiment battery:
//! a 24-slot day, a 3 kW per-house supply limit, eleven appliances per house
//! (four schedulable, seven fixed), and a saturating affine tariff whose
//! slope shrinks with the number of participating houses.
//!
//! The bundled appliance library is synthetic: phase profiles are plausible
//! stand-ins (a washing machine's heating spike followed by low motor phases,
//! an evening oven, all-day refrigeration) with magnitudes chosen so a single
//! house peaks near but under its 3 kW limit. It is not measured data.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    validate_scenario, Appliance, ApplianceKind, House, Scenario, TimeGrid, ValidationReport,
    SUPPLY_TOLERANCE_KW,
};
use crate::pricing::{PricingFunction, Tariff};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("scenario file violates invariants:\n{0}")]
    Validation(ValidationReport),
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
}

/// Supply limit of every generated house, kW.
pub const GENERATED_SUPPLY_LIMIT_KW: f64 = 3.0;
/// Base price of the generated tariff, EUR/kWh.
pub const GENERATED_C_MIN: f64 = 50e-6;
/// Slope numerator of the generated tariff; divided by the house count.
pub const GENERATED_SLOPE_NUMERATOR: f64 = 0.11e-6;
/// Admissible tariff-threshold fractions of the group's maximum peak.
pub const TARIFF_THRESHOLD_FRACTIONS: [f64; 5] = [0.25, 0.30, 0.35, 0.40, 1.00];

/// How much scheduling freedom the shiftable appliances get.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flexibility {
    /// Window equals the run: no choice at all.
    Fix,
    /// Two extra slots of slack.
    Short,
    /// Six extra slots of slack.
    Long,
}

impl Flexibility {
    /// Window width beyond the appliance duration, in slots.
    pub fn slack_slots(&self) -> usize {
        match self {
            Flexibility::Fix => 0,
            Flexibility::Short => 2,
            Flexibility::Long => 6,
        }
    }
}

impl fmt::Display for Flexibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flexibility::Fix => write!(f, "fix"),
            Flexibility::Short => write!(f, "short"),
            Flexibility::Long => write!(f, "long"),
        }
    }
}

/// Whether all houses share identical windows or get per-house offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homogeneity {
    Homogeneous,
    Heterogeneous,
}

impl fmt::Display for Homogeneity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Homogeneity::Homogeneous => write!(f, "homogeneous"),
            Homogeneity::Heterogeneous => write!(f, "heterogeneous"),
        }
    }
}

/// Parameters of one generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSpec {
    pub num_houses: usize,
    pub flexibility: Flexibility,
    pub homogeneity: Homogeneity,
    /// Fraction of the group's maximum peak (houses x 3 kW) at which the
    /// tariff saturates; one of [`TARIFF_THRESHOLD_FRACTIONS`].
    pub tariff_threshold_fraction: f64,
    /// Integer multiple of the minimum slope.
    pub slope_multiplier: u32,
    pub seed: u64,
}

impl GenerationSpec {
    fn validate(&self) -> Result<(), ScenarioError> {
        if self.num_houses == 0 {
            return Err(ScenarioError::InvalidSpec(
                "num_houses must be at least 1".into(),
            ));
        }
        if !TARIFF_THRESHOLD_FRACTIONS.contains(&self.tariff_threshold_fraction) {
            return Err(ScenarioError::InvalidSpec(format!(
                "tariff_threshold_fraction {} is not one of {:?}",
                self.tariff_threshold_fraction, TARIFF_THRESHOLD_FRACTIONS
            )));
        }
        if self.slope_multiplier == 0 {
            return Err(ScenarioError::InvalidSpec(
                "slope_multiplier must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

struct LibraryEntry {
    id: &'static str,
    loads: &'static [f64],
    nominal_start: usize,
    shiftable: bool,
    /// All-day and anchor appliances are excluded from heterogeneous jitter.
    jitterable: bool,
}

/// Synthetic appliance library, ordered by id (the canonical order).
const APPLIANCE_LIBRARY: &[LibraryEntry] = &[
    LibraryEntry {
        id: "boiler",
        loads: &[1.00, 1.00],
        nominal_start: 19,
        shiftable: true,
        jitterable: true,
    },
    LibraryEntry {
        id: "dishwasher",
        loads: &[1.20, 0.60],
        nominal_start: 21,
        shiftable: true,
        jitterable: true,
    },
    LibraryEntry {
        id: "iron",
        loads: &[0.80],
        nominal_start: 17,
        shiftable: false,
        jitterable: true,
    },
    LibraryEntry {
        id: "lights",
        loads: &[0.15, 0.15, 0.15, 0.15, 0.15],
        nominal_start: 18,
        shiftable: false,
        jitterable: true,
    },
    LibraryEntry {
        id: "microwave_oven",
        loads: &[0.90],
        nominal_start: 12,
        shiftable: false,
        jitterable: true,
    },
    LibraryEntry {
        id: "oven",
        loads: &[1.20],
        nominal_start: 18,
        shiftable: false,
        jitterable: true,
    },
    LibraryEntry {
        id: "purifier",
        loads: &[0.05; 24],
        nominal_start: 1,
        shiftable: false,
        jitterable: false,
    },
    LibraryEntry {
        id: "refrigerator",
        loads: &[0.10; 24],
        nominal_start: 1,
        shiftable: false,
        jitterable: false,
    },
    LibraryEntry {
        id: "tv",
        loads: &[0.12, 0.12, 0.12, 0.12],
        nominal_start: 19,
        shiftable: false,
        jitterable: true,
    },
    LibraryEntry {
        id: "vacuum_cleaner",
        loads: &[0.70],
        nominal_start: 18,
        shiftable: true,
        jitterable: true,
    },
    LibraryEntry {
        id: "washing_machine",
        loads: &[1.50, 0.50],
        nominal_start: 20,
        shiftable: true,
        jitterable: false,
    },
];

/// Per-house window offsets cycled in heterogeneous mode; the differing
/// offsets of the first two houses guarantee heterogeneity.
const HOUSE_OFFSET_PATTERN: [i64; 5] = [0, -1, 1, -2, 2];

const SLOT_COUNT: usize = 24;

fn fits_horizon(entry: &LibraryEntry, start: i64) -> bool {
    start >= 1 && start + entry.loads.len() as i64 - 1 <= SLOT_COUNT as i64
}

/// True when the schedule is playable: everything at its start stays under
/// the cap, and a greedy earliest-feasible placement of the shiftable
/// appliances (given the windows the slack will induce) also succeeds.
fn schedule_ok(starts: &[usize], slack: usize) -> bool {
    let cap = GENERATED_SUPPLY_LIMIT_KW + SUPPLY_TOLERANCE_KW;
    let mut nominal = [0.0f64; SLOT_COUNT];
    for (entry, &start) in APPLIANCE_LIBRARY.iter().zip(starts) {
        for (f, &load) in entry.loads.iter().enumerate() {
            nominal[start - 1 + f] += load;
        }
    }
    if nominal.iter().any(|&d| d > cap) {
        return false;
    }
    if slack == 0 {
        return true;
    }
    let mut buffer = [0.0f64; SLOT_COUNT];
    for (entry, &start) in APPLIANCE_LIBRARY.iter().zip(starts) {
        if !entry.shiftable {
            for (f, &load) in entry.loads.iter().enumerate() {
                buffer[start - 1 + f] += load;
            }
        }
    }
    for (entry, &start) in APPLIANCE_LIBRARY.iter().zip(starts) {
        if !entry.shiftable {
            continue;
        }
        let earliest = start.saturating_sub(slack).max(1);
        let placed = (earliest..=start).find(|&s| {
            entry
                .loads
                .iter()
                .enumerate()
                .all(|(f, &load)| buffer[s - 1 + f] + load <= cap)
        });
        match placed {
            Some(s) => {
                for (f, &load) in entry.loads.iter().enumerate() {
                    buffer[s - 1 + f] += load;
                }
            }
            None => return false,
        }
    }
    true
}

fn house_starts(house_index: usize, spec: &GenerationSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let nominal: Vec<usize> = APPLIANCE_LIBRARY.iter().map(|e| e.nominal_start).collect();
    if spec.homogeneity == Homogeneity::Homogeneous {
        return nominal;
    }
    let slack = spec.flexibility.slack_slots();
    let offset = HOUSE_OFFSET_PATTERN[house_index % HOUSE_OFFSET_PATTERN.len()];
    let mut tentative: Vec<usize> = APPLIANCE_LIBRARY
        .iter()
        .map(|entry| {
            if !entry.jitterable && !entry.shiftable {
                return entry.nominal_start; // all-day appliances stay put
            }
            let shifted = entry.nominal_start as i64 + offset;
            if fits_horizon(entry, shifted) {
                shifted as usize
            } else {
                entry.nominal_start
            }
        })
        .collect();
    if !schedule_ok(&tentative, slack) {
        tentative = nominal;
    }
    for (k, entry) in APPLIANCE_LIBRARY.iter().enumerate() {
        if !entry.jitterable {
            continue;
        }
        let delta = rng.gen_range(-1i64..=1);
        if delta == 0 {
            continue;
        }
        let candidate_start = tentative[k] as i64 + delta;
        if !fits_horizon(entry, candidate_start) {
            continue;
        }
        let mut candidate = tentative.clone();
        candidate[k] = candidate_start as usize;
        if schedule_ok(&candidate, slack) {
            tentative = candidate;
        }
    }
    tentative
}

/// Generates a scenario from a spec, deterministically in the seed.
pub fn generate(spec: &GenerationSpec) -> Result<Scenario, ScenarioError> {
    spec.validate()?;
    let slope = spec.slope_multiplier as f64 * GENERATED_SLOPE_NUMERATOR / spec.num_houses as f64;
    let threshold_kw =
        spec.tariff_threshold_fraction * spec.num_houses as f64 * GENERATED_SUPPLY_LIMIT_KW;
    let tariff = Tariff::piecewise_affine(GENERATED_C_MIN, slope, threshold_kw);

    let slack = spec.flexibility.slack_slots();
    let width = spec.num_houses.to_string().len().max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let houses: Vec<House> = (0..spec.num_houses)
        .map(|i| {
            let starts = house_starts(i, spec, &mut rng);
            let appliances = APPLIANCE_LIBRARY
                .iter()
                .zip(&starts)
                .map(|(entry, &start)| {
                    if entry.shiftable {
                        let earliest = start.saturating_sub(slack).max(1);
                        let latest_end = start + entry.loads.len() - 1;
                        Appliance::shiftable(entry.id, entry.loads.to_vec(), earliest, latest_end)
                    } else {
                        Appliance::fixed(entry.id, entry.loads.to_vec(), start)
                    }
                })
                .collect();
            House::new(
                format!("house{:0width$}", i + 1, width = width),
                GENERATED_SUPPLY_LIMIT_KW,
                appliances,
            )
        })
        .collect();

    Ok(Scenario::new(TimeGrid::daily(), tariff, houses))
}

// ---------------------------------------------------------------------------
// Scenario file schema (strict: unknown fields are rejected)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    grid: GridFile,
    tariff: TariffFile,
    houses: Vec<HouseFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    slot_count: usize,
    slot_duration_hours: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TariffFile {
    variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold_kw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HouseFile {
    id: String,
    supply_limit_kw: f64,
    appliances: Vec<ApplianceFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplianceFile {
    id: String,
    kind: String,
    phase_loads_kw: Vec<f64>,
    earliest_start: usize,
    latest_end: usize,
}

fn tariff_to_file(tariff: &Tariff) -> Result<TariffFile, ScenarioError> {
    if !tariff.is_time_invariant() {
        return Err(ScenarioError::Schema(
            "tariffs with per-slot overrides cannot be written to a scenario file".into(),
        ));
    }
    Ok(match *tariff.base() {
        PricingFunction::PiecewiseAffine {
            c_min,
            slope,
            threshold_kw,
        } => TariffFile {
            variant: "piecewise_affine".into(),
            c_min: Some(c_min),
            slope: Some(slope),
            threshold_kw: Some(threshold_kw),
            alpha: None,
            beta: None,
        },
        PricingFunction::PowerLaw { alpha, beta } => TariffFile {
            variant: "power_law".into(),
            c_min: None,
            slope: None,
            threshold_kw: None,
            alpha: Some(alpha),
            beta: Some(beta),
        },
    })
}

fn tariff_from_file(file: &TariffFile) -> Result<Tariff, ScenarioError> {
    let absent = |name: &str, value: &Option<f64>| -> Result<(), ScenarioError> {
        if value.is_some() {
            Err(ScenarioError::Schema(format!(
                "tariff field `{name}` is not allowed for variant `{}`",
                file.variant
            )))
        } else {
            Ok(())
        }
    };
    let required = |name: &str, value: &Option<f64>| -> Result<f64, ScenarioError> {
        value.ok_or_else(|| {
            ScenarioError::Schema(format!(
                "tariff variant `{}` requires field `{name}`",
                file.variant
            ))
        })
    };
    match file.variant.as_str() {
        "piecewise_affine" => {
            absent("alpha", &file.alpha)?;
            absent("beta", &file.beta)?;
            Ok(Tariff::piecewise_affine(
                required("c_min", &file.c_min)?,
                required("slope", &file.slope)?,
                required("threshold_kw", &file.threshold_kw)?,
            ))
        }
        "power_law" => {
            absent("c_min", &file.c_min)?;
            absent("slope", &file.slope)?;
            absent("threshold_kw", &file.threshold_kw)?;
            Ok(Tariff::power_law(
                required("alpha", &file.alpha)?,
                required("beta", &file.beta)?,
            ))
        }
        other => Err(ScenarioError::Schema(format!(
            "unknown tariff variant `{other}` (expected `piecewise_affine` or `power_law`)"
        ))),
    }
}

fn scenario_to_file(scenario: &Scenario) -> Result<ScenarioFile, ScenarioError> {
    Ok(ScenarioFile {
        grid: GridFile {
            slot_count: scenario.grid.slot_count,
            slot_duration_hours: scenario.grid.slot_duration_hours,
        },
        tariff: tariff_to_file(&scenario.tariff)?,
        houses: scenario
            .houses
            .iter()
            .map(|house| HouseFile {
                id: house.id.clone(),
                supply_limit_kw: house.supply_limit_kw,
                appliances: house
                    .appliances
                    .iter()
                    .map(|a| ApplianceFile {
                        id: a.id.clone(),
                        kind: a.kind.to_string(),
                        phase_loads_kw: a.phase_loads_kw.clone(),
                        earliest_start: a.earliest_start,
                        latest_end: a.latest_end,
                    })
                    .collect(),
            })
            .collect(),
    })
}

fn scenario_from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let tariff = tariff_from_file(&file.tariff)?;
    let houses = file
        .houses
        .into_iter()
        .map(|house| {
            let appliances = house
                .appliances
                .into_iter()
                .map(|a| {
                    let kind = match a.kind.as_str() {
                        "shiftable" => ApplianceKind::Shiftable,
                        "fixed" => ApplianceKind::Fixed,
                        other => {
                            return Err(ScenarioError::Schema(format!(
                                "appliance `{}`: unknown kind `{other}` (expected `shiftable` or `fixed`)",
                                a.id
                            )))
                        }
                    };
                    Ok(Appliance::new(
                        a.id,
                        kind,
                        a.phase_loads_kw,
                        a.earliest_start,
                        a.latest_end,
                    ))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(House::new(house.id, house.supply_limit_kw, appliances))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    let scenario = Scenario::new(
        TimeGrid::new(file.grid.slot_count, file.grid.slot_duration_hours),
        tariff,
        houses,
    );
    let report = validate_scenario(&scenario);
    if !report.is_valid() {
        return Err(ScenarioError::Validation(report));
    }
    Ok(scenario)
}

/// Serializes a scenario to a JSON scenario file (pretty-printed, trailing
/// newline, byte-identical for equal scenarios).
pub fn save(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let file = scenario_to_file(scenario)?;
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses and validates a scenario file; round-trips [`save`] exactly.
pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let file: ScenarioFile = serde_json::from_str(&text)?;
    scenario_from_file(file)
}
