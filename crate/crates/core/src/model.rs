//! Domain types for scheduling-game instances: the time grid, appliances with
//! phase-based load profiles, houses with a per-slot supply limit, and strategy
//! profiles mapping each schedulable appliance to a start slot.
//!
//! Slot indices are 1-based throughout (slots `1..=slot_count`); demand vectors
//! are `Vec<f64>` where index `t - 1` holds the power of slot `t` in kW.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::pricing::Tariff;

/// Slack allowed when comparing a house's per-slot demand against its supply
/// limit, so that loads summing exactly to the limit are not rejected by
/// floating-point rounding.
pub const SUPPLY_TOLERANCE_KW: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("scenario is invalid:\n{0}")]
    InvalidScenario(ValidationReport),
    #[error("unknown house id `{0}`")]
    UnknownHouse(String),
    #[error("unknown player `{0}`")]
    UnknownPlayer(PlayerId),
    #[error("appliance `{appliance}` cannot start at slot {start}: window is {window_start}..={window_end}")]
    StartOutsideWindow {
        appliance: String,
        start: usize,
        window_start: usize,
        window_end: usize,
    },
    #[error("profile is missing a start slot for player `{0}`")]
    MissingPlayer(PlayerId),
    #[error("start assignment for `{0}` does not refer to a shiftable appliance")]
    NotAPlayer(PlayerId),
    #[error("profile violates the supply limit of house `{house}` at slot {slot}: {demand_kw} kW > {limit_kw} kW")]
    SupplyLimitExceeded {
        house: String,
        slot: usize,
        demand_kw: f64,
        limit_kw: f64,
    },
}

/// The daily scheduling horizon: a number of equal slots and their duration.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub slot_count: usize,
    pub slot_duration_hours: f64,
}

impl TimeGrid {
    pub fn new(slot_count: usize, slot_duration_hours: f64) -> Self {
        Self {
            slot_count,
            slot_duration_hours,
        }
    }

    /// 24 slots of one hour, the configuration used by all bundled scenarios.
    pub fn daily() -> Self {
        Self::new(24, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplianceKind {
    /// Start slot is a decision variable: the window is wider than the run.
    Shiftable,
    /// Start slot is forced: the window equals the run length.
    Fixed,
}

impl fmt::Display for ApplianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApplianceKind::Shiftable => write!(f, "shiftable"),
            ApplianceKind::Fixed => write!(f, "fixed"),
        }
    }
}

/// A non-preemptable appliance: once started it runs one phase per slot,
/// drawing `phase_loads_kw[f]` in its `f`-th slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Appliance {
    pub id: String,
    pub kind: ApplianceKind,
    pub phase_loads_kw: Vec<f64>,
    /// First slot the run may start in.
    pub earliest_start: usize,
    /// Last slot the run may still occupy.
    pub latest_end: usize,
}

impl Appliance {
    /// Builds an appliance, auto-classifying it as fixed when its window
    /// leaves no scheduling choice (degenerate shiftable input).
    pub fn new(
        id: impl Into<String>,
        kind: ApplianceKind,
        phase_loads_kw: Vec<f64>,
        earliest_start: usize,
        latest_end: usize,
    ) -> Self {
        let mut appliance = Self {
            id: id.into(),
            kind,
            phase_loads_kw,
            earliest_start,
            latest_end,
        };
        if appliance.kind == ApplianceKind::Shiftable
            && appliance.last_start() == Some(appliance.earliest_start)
        {
            appliance.kind = ApplianceKind::Fixed;
        }
        appliance
    }

    /// A shiftable appliance with the given start window.
    pub fn shiftable(
        id: impl Into<String>,
        phase_loads_kw: Vec<f64>,
        earliest_start: usize,
        latest_end: usize,
    ) -> Self {
        Self::new(
            id,
            ApplianceKind::Shiftable,
            phase_loads_kw,
            earliest_start,
            latest_end,
        )
    }

    /// A fixed appliance forced to run starting at `start`.
    pub fn fixed(id: impl Into<String>, phase_loads_kw: Vec<f64>, start: usize) -> Self {
        let duration = phase_loads_kw.len();
        Self::new(
            id,
            ApplianceKind::Fixed,
            phase_loads_kw,
            start,
            start + duration.saturating_sub(1),
        )
    }

    /// Number of consecutive slots the appliance occupies.
    pub fn duration(&self) -> usize {
        self.phase_loads_kw.len()
    }

    /// Latest feasible start slot, or `None` when the window is ill-formed.
    pub fn last_start(&self) -> Option<usize> {
        (self.latest_end + 1).checked_sub(self.duration())
    }

    /// True when `start` keeps the whole run inside the window.
    pub fn start_in_window(&self, start: usize) -> bool {
        match self.last_start() {
            Some(last) => start >= self.earliest_start && start <= last,
            None => false,
        }
    }
}

/// A household: its appliances and the retailer-imposed per-slot power cap.
#[derive(Debug, Clone, PartialEq)]
pub struct House {
    pub id: String,
    pub supply_limit_kw: f64,
    pub appliances: Vec<Appliance>,
}

impl House {
    /// Builds a house; appliances are kept sorted by id so that iteration
    /// order (and hence player order) is canonical.
    pub fn new(
        id: impl Into<String>,
        supply_limit_kw: f64,
        mut appliances: Vec<Appliance>,
    ) -> Self {
        appliances.sort_by(|a, b| a.id.cmp(&b.id));
        Self {
            id: id.into(),
            supply_limit_kw,
            appliances,
        }
    }
}

/// A complete game instance: grid, tariff and houses.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub tariff: Tariff,
    pub houses: Vec<House>,
}

impl Scenario {
    /// Builds a scenario; houses are kept sorted by id (canonical order).
    pub fn new(grid: TimeGrid, tariff: Tariff, mut houses: Vec<House>) -> Self {
        houses.sort_by(|a, b| a.id.cmp(&b.id));
        Self {
            grid,
            tariff,
            houses,
        }
    }

    pub fn house(&self, house_id: &str) -> Option<&House> {
        self.house_index(house_id).map(|i| &self.houses[i])
    }

    pub(crate) fn house_index(&self, house_id: &str) -> Option<usize> {
        self.houses
            .binary_search_by(|h| h.id.as_str().cmp(house_id))
            .ok()
    }

    /// Identities of all players (shiftable appliances) in canonical order.
    pub fn player_ids(&self) -> Vec<PlayerId> {
        let mut ids = Vec::new();
        for house in &self.houses {
            for appliance in &house.appliances {
                if appliance.kind == ApplianceKind::Shiftable {
                    ids.push(PlayerId::new(&house.id, &appliance.id));
                }
            }
        }
        ids
    }

    /// Number of shiftable appliances across all houses.
    pub fn player_count(&self) -> usize {
        self.houses
            .iter()
            .map(|h| {
                h.appliances
                    .iter()
                    .filter(|a| a.kind == ApplianceKind::Shiftable)
                    .count()
            })
            .sum()
    }
}

/// Identity of a player: one shiftable appliance of one house.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct PlayerId {
    pub house_id: String,
    pub appliance_id: String,
}

impl PlayerId {
    pub fn new(house_id: impl Into<String>, appliance_id: impl Into<String>) -> Self {
        Self {
            house_id: house_id.into(),
            appliance_id: appliance_id.into(),
        }
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.house_id, self.appliance_id)
    }
}

/// A single entry of a validation report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Where the problem is, e.g. `house h01 / appliance wm`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Result of [`validate_scenario`]: empty iff the scenario is well-formed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a scenario and reports all violations.
pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let grid = &scenario.grid;

    if grid.slot_count == 0 {
        report.push("grid", "slot_count must be at least 1");
    }
    if grid.slot_duration_hours <= 0.0 || !grid.slot_duration_hours.is_finite() {
        report.push("grid", "slot_duration_hours must be positive and finite");
    }

    for v in scenario.tariff.invariant_violations() {
        report.push("tariff", v);
    }

    for pair in scenario.houses.windows(2) {
        if pair[0].id == pair[1].id {
            report.push(format!("house {}", pair[0].id), "duplicate house id");
        }
    }

    for house in &scenario.houses {
        let house_loc = format!("house {}", house.id);
        if house.supply_limit_kw <= 0.0 || !house.supply_limit_kw.is_finite() {
            report.push(&house_loc, "supply_limit_kw must be positive and finite");
        }
        for pair in house.appliances.windows(2) {
            if pair[0].id == pair[1].id {
                report.push(
                    format!("{house_loc} / appliance {}", pair[0].id),
                    "duplicate appliance id",
                );
            }
        }
        for appliance in &house.appliances {
            let loc = format!("{house_loc} / appliance {}", appliance.id);
            let d = appliance.duration();
            if d == 0 {
                report.push(&loc, "phase_loads_kw must contain at least one phase");
                continue;
            }
            for (f, &load) in appliance.phase_loads_kw.iter().enumerate() {
                if load < 0.0 || !load.is_finite() {
                    report.push(&loc, format!("phase {} load must be non-negative", f + 1));
                }
                if load > house.supply_limit_kw {
                    report.push(
                        &loc,
                        format!(
                            "phase {} load {} kW exceeds supply limit {} kW",
                            f + 1,
                            load,
                            house.supply_limit_kw
                        ),
                    );
                }
            }
            if appliance.earliest_start < 1 {
                report.push(&loc, "earliest_start must be at least 1");
            }
            match appliance.last_start() {
                Some(last) if appliance.earliest_start <= last => {
                    let singleton = appliance.earliest_start == last;
                    if appliance.kind == ApplianceKind::Fixed && !singleton {
                        report.push(
                            &loc,
                            "fixed appliance must have a window equal to its duration",
                        );
                    }
                }
                _ => {
                    report.push(
                        &loc,
                        format!(
                            "earliest_start {} exceeds the latest feasible start (latest_end {} - duration {} + 1)",
                            appliance.earliest_start, appliance.latest_end, d
                        ),
                    );
                }
            }
            if appliance.latest_end > grid.slot_count {
                report.push(
                    &loc,
                    format!(
                        "latest_end {} exceeds the horizon of {} slots",
                        appliance.latest_end, grid.slot_count
                    ),
                );
            }
        }
    }

    report
}

/// Demand vector of one appliance started at `start`: its phase loads placed
/// on consecutive slots, zero elsewhere.
pub fn appliance_demand(
    appliance: &Appliance,
    start: usize,
    grid: &TimeGrid,
) -> Result<Vec<f64>, ModelError> {
    if !appliance.start_in_window(start) {
        return Err(ModelError::StartOutsideWindow {
            appliance: appliance.id.clone(),
            start,
            window_start: appliance.earliest_start,
            window_end: appliance.last_start().unwrap_or(appliance.earliest_start),
        });
    }
    let mut demand = vec![0.0; grid.slot_count];
    add_run(&mut demand, appliance, start);
    Ok(demand)
}

/// Adds an appliance run to a demand buffer (no window check).
fn add_run(demand: &mut [f64], appliance: &Appliance, start: usize) {
    for (f, &load) in appliance.phase_loads_kw.iter().enumerate() {
        demand[start - 1 + f] += load;
    }
}

/// Subtracts an appliance run from a demand buffer.
fn remove_run(demand: &mut [f64], appliance: &Appliance, start: usize) {
    for (f, &load) in appliance.phase_loads_kw.iter().enumerate() {
        demand[start - 1 + f] -= load;
    }
}

/// Canonical ordering data shared by all profiles of one scenario.
#[derive(Debug)]
pub(crate) struct ProfileIndex {
    /// Players in canonical order: `(house index, appliance index)`.
    pub players: Vec<(usize, usize)>,
    /// Reverse map `[house][appliance] -> player index`.
    pub player_of: Vec<Vec<Option<usize>>>,
}

impl ProfileIndex {
    fn build(scenario: &Scenario) -> Self {
        let mut players = Vec::new();
        let mut player_of = Vec::with_capacity(scenario.houses.len());
        for (h, house) in scenario.houses.iter().enumerate() {
            let mut row = Vec::with_capacity(house.appliances.len());
            for (a, appliance) in house.appliances.iter().enumerate() {
                if appliance.kind == ApplianceKind::Shiftable {
                    row.push(Some(players.len()));
                    players.push((h, a));
                } else {
                    row.push(None);
                }
            }
            player_of.push(row);
        }
        Self { players, player_of }
    }
}

/// A pure strategy profile: one start slot per shiftable appliance.
///
/// Profiles are immutable; "mutation" happens by building a replacement via
/// [`StrategyProfile::with_start`], so snapshots can be shared freely.
#[derive(Debug, Clone)]
pub struct StrategyProfile<'s> {
    scenario: &'s Scenario,
    index: Arc<ProfileIndex>,
    starts: Vec<usize>,
}

impl<'s> StrategyProfile<'s> {
    /// Builds a profile from explicit start slots over a structurally valid
    /// scenario. Every shiftable appliance must be assigned a start inside
    /// its window; supply limits are *not* checked here (see
    /// [`StrategyProfile::check_supply_limits`]).
    pub fn new(
        scenario: &'s Scenario,
        starts: &BTreeMap<PlayerId, usize>,
    ) -> Result<Self, ModelError> {
        let report = validate_scenario(scenario);
        if !report.is_valid() {
            return Err(ModelError::InvalidScenario(report));
        }
        let index = Arc::new(ProfileIndex::build(scenario));
        let mut assigned = vec![None; index.players.len()];
        for (player, &start) in starts {
            let position = scenario
                .house_index(&player.house_id)
                .and_then(|h| {
                    scenario.houses[h]
                        .appliances
                        .iter()
                        .position(|a| a.id == player.appliance_id)
                        .map(|a| (h, a))
                })
                .ok_or_else(|| ModelError::UnknownPlayer(player.clone()))?;
            let slot = index.player_of[position.0][position.1]
                .ok_or_else(|| ModelError::NotAPlayer(player.clone()))?;
            let appliance = &scenario.houses[position.0].appliances[position.1];
            if !appliance.start_in_window(start) {
                return Err(ModelError::StartOutsideWindow {
                    appliance: appliance.id.clone(),
                    start,
                    window_start: appliance.earliest_start,
                    window_end: appliance.last_start().unwrap_or(appliance.earliest_start),
                });
            }
            assigned[slot] = Some(start);
        }
        let starts = assigned
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| {
                    let (h, a) = index.players[i];
                    ModelError::MissingPlayer(PlayerId::new(
                        &scenario.houses[h].id,
                        &scenario.houses[h].appliances[a].id,
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            scenario,
            index,
            starts,
        })
    }

    pub(crate) fn from_starts(scenario: &'s Scenario, starts: Vec<usize>) -> Self {
        Self::from_parts(scenario, Arc::new(ProfileIndex::build(scenario)), starts)
    }

    pub(crate) fn build_index(scenario: &Scenario) -> Arc<ProfileIndex> {
        Arc::new(ProfileIndex::build(scenario))
    }

    pub(crate) fn from_parts(
        scenario: &'s Scenario,
        index: Arc<ProfileIndex>,
        starts: Vec<usize>,
    ) -> Self {
        debug_assert_eq!(starts.len(), scenario.player_count());
        Self {
            scenario,
            index,
            starts,
        }
    }

    pub fn scenario(&self) -> &'s Scenario {
        self.scenario
    }

    pub fn player_count(&self) -> usize {
        self.starts.len()
    }

    /// Raw start slots in canonical player order.
    pub fn start_slots(&self) -> &[usize] {
        &self.starts
    }

    /// Identity of the player at canonical position `player_index`.
    pub fn player_id(&self, player_index: usize) -> PlayerId {
        let (h, a) = self.index.players[player_index];
        PlayerId::new(
            &self.scenario.houses[h].id,
            &self.scenario.houses[h].appliances[a].id,
        )
    }

    /// All `(player, start)` assignments in canonical order.
    pub fn assignments(&self) -> Vec<(PlayerId, usize)> {
        (0..self.starts.len())
            .map(|i| (self.player_id(i), self.starts[i]))
            .collect()
    }

    pub(crate) fn player_index(&self, player: &PlayerId) -> Result<usize, ModelError> {
        let h = self
            .scenario
            .house_index(&player.house_id)
            .ok_or_else(|| ModelError::UnknownPlayer(player.clone()))?;
        let a = self.scenario.houses[h]
            .appliances
            .iter()
            .position(|a| a.id == player.appliance_id)
            .ok_or_else(|| ModelError::UnknownPlayer(player.clone()))?;
        self.index.player_of[h][a].ok_or_else(|| ModelError::NotAPlayer(player.clone()))
    }

    pub(crate) fn player_slot(&self, player_index: usize) -> (usize, usize) {
        self.index.players[player_index]
    }

    pub(crate) fn house_of_player(&self, player_index: usize) -> usize {
        self.index.players[player_index].0
    }

    pub(crate) fn players_of_house(&self, house_index: usize) -> Vec<usize> {
        self.index.player_of[house_index]
            .iter()
            .filter_map(|p| *p)
            .collect()
    }

    /// Start slot of a player.
    pub fn start_of(&self, player: &PlayerId) -> Result<usize, ModelError> {
        Ok(self.starts[self.player_index(player)?])
    }

    /// Replacement profile with one player's start changed (checked against
    /// the window; supply limits are the caller's concern).
    pub fn with_start(&self, player: &PlayerId, start: usize) -> Result<Self, ModelError> {
        let idx = self.player_index(player)?;
        let (h, a) = self.index.players[idx];
        let appliance = &self.scenario.houses[h].appliances[a];
        if !appliance.start_in_window(start) {
            return Err(ModelError::StartOutsideWindow {
                appliance: appliance.id.clone(),
                start,
                window_start: appliance.earliest_start,
                window_end: appliance.last_start().unwrap_or(appliance.earliest_start),
            });
        }
        Ok(self.with_start_unchecked(idx, start))
    }

    pub(crate) fn with_start_unchecked(&self, player_index: usize, start: usize) -> Self {
        let mut starts = self.starts.clone();
        starts[player_index] = start;
        Self {
            scenario: self.scenario,
            index: Arc::clone(&self.index),
            starts,
        }
    }

    pub(crate) fn with_starts_unchecked(&self, changes: &[(usize, usize)]) -> Self {
        let mut starts = self.starts.clone();
        for &(player_index, start) in changes {
            starts[player_index] = start;
        }
        Self {
            scenario: self.scenario,
            index: Arc::clone(&self.index),
            starts,
        }
    }

    /// Effective start slot of any appliance: forced for fixed ones, the
    /// profile's choice for shiftable ones.
    fn effective_start(&self, house_index: usize, appliance_index: usize) -> usize {
        match self.index.player_of[house_index][appliance_index] {
            Some(p) => self.starts[p],
            None => self.scenario.houses[house_index].appliances[appliance_index].earliest_start,
        }
    }

    pub(crate) fn house_demand_by_index(&self, house_index: usize) -> Vec<f64> {
        let mut demand = vec![0.0; self.scenario.grid.slot_count];
        let house = &self.scenario.houses[house_index];
        for (a, appliance) in house.appliances.iter().enumerate() {
            add_run(&mut demand, appliance, self.effective_start(house_index, a));
        }
        demand
    }

    /// Demand vector of one house under this profile.
    pub fn house_demand(&self, house_id: &str) -> Result<Vec<f64>, ModelError> {
        let h = self
            .scenario
            .house_index(house_id)
            .ok_or_else(|| ModelError::UnknownHouse(house_id.to_string()))?;
        Ok(self.house_demand_by_index(h))
    }

    /// Aggregate demand vector of the whole group under this profile.
    pub fn total_demand(&self) -> Vec<f64> {
        let mut demand = vec![0.0; self.scenario.grid.slot_count];
        for (h, house) in self.scenario.houses.iter().enumerate() {
            for (a, appliance) in house.appliances.iter().enumerate() {
                add_run(&mut demand, appliance, self.effective_start(h, a));
            }
        }
        demand
    }

    /// Start slots that keep the player's house under its supply limit,
    /// holding housemates (and everything else) fixed.
    ///
    /// The player's own current placement is excluded from the house demand
    /// before checking, so the result answers "where could this appliance go".
    pub fn feasible_starts(&self, player: &PlayerId) -> Result<Vec<usize>, ModelError> {
        let idx = self.player_index(player)?;
        Ok(self.feasible_starts_by_index(idx))
    }

    pub(crate) fn feasible_starts_by_index(&self, player_index: usize) -> Vec<usize> {
        let (h, a) = self.index.players[player_index];
        let house = &self.scenario.houses[h];
        let appliance = &house.appliances[a];
        let mut base = self.house_demand_by_index(h);
        remove_run(&mut base, appliance, self.starts[player_index]);
        let cap = house.supply_limit_kw + SUPPLY_TOLERANCE_KW;
        let last = appliance.last_start().expect("validated appliance window");
        (appliance.earliest_start..=last)
            .filter(|&s| {
                appliance
                    .phase_loads_kw
                    .iter()
                    .enumerate()
                    .all(|(f, &load)| base[s - 1 + f] + load <= cap)
            })
            .collect()
    }

    /// Verifies the per-house supply-limit constraint at every slot.
    pub fn check_supply_limits(&self) -> Result<(), ModelError> {
        for h in 0..self.scenario.houses.len() {
            self.check_house_supply_limit(h)?;
        }
        Ok(())
    }

    pub(crate) fn check_house_supply_limit(&self, house_index: usize) -> Result<(), ModelError> {
        let house = &self.scenario.houses[house_index];
        let demand = self.house_demand_by_index(house_index);
        for (t, &d) in demand.iter().enumerate() {
            if d > house.supply_limit_kw + SUPPLY_TOLERANCE_KW {
                return Err(ModelError::SupplyLimitExceeded {
                    house: house.id.clone(),
                    slot: t + 1,
                    demand_kw: d,
                    limit_kw: house.supply_limit_kw,
                });
            }
        }
        Ok(())
    }
}

impl PartialEq for StrategyProfile<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.scenario, other.scenario) && self.starts == other.starts
    }
}
