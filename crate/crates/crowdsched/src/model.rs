//! Domain types and feasibility rules.
//!
//! Distances are kilometers, times are minutes, and one unit of UAV power
//! moves one kilometer. Agents are only available inside their
//! `[uptime, downtime)` window.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Slack for float comparisons on distances, times, and power budgets.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
}

impl GridPoint {
    pub fn new(x: f64, y: f64) -> Self {
        GridPoint { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Uav {
    pub id: usize,
    pub loc: GridPoint,
    /// km per minute.
    pub speed: f64,
    /// Battery capacity in km of travel.
    pub full_power: f64,
    pub power: f64,
    pub uptime: f64,
    pub downtime: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Worker {
    pub id: usize,
    pub loc: GridPoint,
    pub speed: f64,
    pub uptime: f64,
    pub downtime: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: usize,
    pub loc: GridPoint,
    pub speed: f64,
    /// Power units restored per minute of charging.
    pub charge_power: f64,
    pub uptime: f64,
    pub downtime: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task {
    pub id: usize,
    pub loc: GridPoint,
    /// Power a UAV spends executing the task, in km-equivalents.
    pub cost_power: f64,
    #[serde(default)]
    pub completed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargePoint {
    pub id: usize,
    pub loc: GridPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Hierarchical,
    Uniform,
}

impl Default for WeightMode {
    fn default() -> Self {
        WeightMode::Hierarchical
    }
}

/// Optional disturbance models layered on top of the deterministic episode.
/// `wind` and `comms_cost` are uniform ranges; the probabilities are
/// per-epoch draws.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Extra energy per km of travel, drawn once per committed action.
    #[serde(default)]
    pub wind: Option<(f64, f64)>,
    /// Energy drained from each online UAV at every decision epoch.
    #[serde(default)]
    pub comms_cost: Option<(f64, f64)>,
    /// Chance for an online idle agent to go permanently offline each epoch.
    #[serde(default)]
    pub failure_prob: Option<f64>,
    /// Chance for a committed joint action to silently void at commit time.
    #[serde(default)]
    pub match_loss_prob: Option<f64>,
}

impl PerturbationConfig {
    pub fn is_off(&self) -> bool {
        self.wind.is_none()
            && self.comms_cost.is_none()
            && self.failure_prob.is_none()
            && self.match_loss_prob.is_none()
    }

    /// True when energy bookkeeping can deviate from the planned amounts,
    /// which switches the simulator from abort-on-negative to clamp-at-zero.
    pub fn energy_noise(&self) -> bool {
        self.wind.is_some() || self.comms_cost.is_some()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub area: Area,
    pub uavs: Vec<Uav>,
    pub workers: Vec<Worker>,
    pub vehicles: Vec<Vehicle>,
    pub tasks: Vec<Task>,
    pub charges: Vec<ChargePoint>,
    /// Decision interval in minutes.
    pub interval: f64,
    /// Episode horizon in minutes.
    pub limit_time: f64,
    #[serde(default)]
    pub weight_mode: WeightMode,
    #[serde(default)]
    pub perturbations: PerturbationConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        // Infallible for these types; keep the signature simple.
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

pub fn distance(a: GridPoint, b: GridPoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Smallest positive multiple of `interval` that is >= `t`, so a zero-length
/// trip still occupies one interval. A tiny slack keeps accumulated float
/// noise in `t` from bumping the result to the next step.
pub fn ceil_to_interval(t: f64, interval: f64) -> f64 {
    assert!(t >= 0.0, "negative duration {t}");
    assert!(interval > 0.0, "non-positive interval {interval}");
    let steps = (t / interval - EPS).ceil().max(1.0);
    steps * interval
}

pub fn nearest_charge_distance(from: GridPoint, charges: &[ChargePoint]) -> Option<f64> {
    charges
        .iter()
        .map(|c| distance(from, c.loc))
        .min_by(|a, b| a.total_cmp(b))
}

/// A UAV may take on a task only if it can fly there, execute, and still
/// reach some charging point: round-trip energy within current power.
pub fn task_feasible(u: &Uav, task: &Task, charges: &[ChargePoint]) -> bool {
    match nearest_charge_distance(task.loc, charges) {
        Some(back) => distance(u.loc, task.loc) + task.cost_power + back <= u.power + EPS,
        None => false,
    }
}

/// A UAV may head to a charging point only if it can reach it.
pub fn charge_feasible(u: &Uav, c: &ChargePoint) -> bool {
    distance(u.loc, c.loc) <= u.power + EPS
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub entity: String,
    pub message: String,
}

impl Violation {
    fn new(entity: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            entity: entity.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

fn check_point(
    out: &mut Vec<Violation>,
    entity: String,
    loc: GridPoint,
    area: &Area,
) {
    let inside = loc.x >= 0.0 && loc.x <= area.width && loc.y >= 0.0 && loc.y <= area.height;
    if !(loc.x.is_finite() && loc.y.is_finite()) || !inside {
        out.push(Violation::new(
            entity,
            format!("location ({}, {}) outside area", loc.x, loc.y),
        ));
    }
}

fn check_window(out: &mut Vec<Violation>, entity: &str, uptime: f64, downtime: f64, limit: f64) {
    if !(uptime >= 0.0 && uptime < downtime) {
        out.push(Violation::new(
            entity,
            format!("window [{uptime}, {downtime}) is empty or negative"),
        ));
    } else if downtime > limit + EPS {
        out.push(Violation::new(
            entity,
            format!("window end {downtime} exceeds limit_time {limit}"),
        ));
    }
}

/// Full structural check of a scenario. Collects every violation instead of
/// stopping at the first so callers can report them all.
pub fn validate_scenario(s: &Scenario) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();

    if !(s.area.width > 0.0 && s.area.height > 0.0) {
        v.push(Violation::new("area", "width and height must be positive"));
    }
    if !(s.interval > 0.0) {
        v.push(Violation::new("interval", "must be positive"));
    }
    if !(s.limit_time > 0.0) {
        v.push(Violation::new("limit_time", "must be positive"));
    } else if s.interval > 0.0 {
        let steps = s.limit_time / s.interval;
        if (steps - steps.round()).abs() > 1e-6 {
            v.push(Violation::new(
                "limit_time",
                format!("{} is not a multiple of interval {}", s.limit_time, s.interval),
            ));
        }
    }

    for (i, u) in s.uavs.iter().enumerate() {
        let ent = format!("uavs[{i}]");
        if u.id != i {
            v.push(Violation::new(&ent, format!("id {} must equal index {i}", u.id)));
        }
        check_point(&mut v, ent.clone(), u.loc, &s.area);
        if !(u.speed > 0.0) {
            v.push(Violation::new(&ent, "speed must be positive"));
        }
        if !(u.full_power > 0.0) {
            v.push(Violation::new(&ent, "full_power must be positive"));
        }
        if !(u.power >= 0.0 && u.power <= u.full_power + EPS) {
            v.push(Violation::new(
                &ent,
                format!("power {} outside [0, full_power {}]", u.power, u.full_power),
            ));
        }
        check_window(&mut v, &ent, u.uptime, u.downtime, s.limit_time);
    }
    for (i, w) in s.workers.iter().enumerate() {
        let ent = format!("workers[{i}]");
        if w.id != i {
            v.push(Violation::new(&ent, format!("id {} must equal index {i}", w.id)));
        }
        check_point(&mut v, ent.clone(), w.loc, &s.area);
        if !(w.speed > 0.0) {
            v.push(Violation::new(&ent, "speed must be positive"));
        }
        check_window(&mut v, &ent, w.uptime, w.downtime, s.limit_time);
    }
    for (i, ve) in s.vehicles.iter().enumerate() {
        let ent = format!("vehicles[{i}]");
        if ve.id != i {
            v.push(Violation::new(&ent, format!("id {} must equal index {i}", ve.id)));
        }
        check_point(&mut v, ent.clone(), ve.loc, &s.area);
        if !(ve.speed > 0.0) {
            v.push(Violation::new(&ent, "speed must be positive"));
        }
        if !(ve.charge_power > 0.0) {
            v.push(Violation::new(&ent, "charge_power must be positive"));
        }
        check_window(&mut v, &ent, ve.uptime, ve.downtime, s.limit_time);
    }
    for (i, t) in s.tasks.iter().enumerate() {
        let ent = format!("tasks[{i}]");
        if t.id != i {
            v.push(Violation::new(&ent, format!("id {} must equal index {i}", t.id)));
        }
        check_point(&mut v, ent.clone(), t.loc, &s.area);
        if !(t.cost_power >= 0.0) {
            v.push(Violation::new(&ent, "cost_power must be non-negative"));
        }
    }
    for (i, c) in s.charges.iter().enumerate() {
        let ent = format!("charges[{i}]");
        if c.id != i {
            v.push(Violation::new(&ent, format!("id {} must equal index {i}", c.id)));
        }
        check_point(&mut v, ent.clone(), c.loc, &s.area);
    }

    if let Some((lo, hi)) = s.perturbations.wind {
        if !(0.0 <= lo && lo <= hi) {
            v.push(Violation::new("perturbations.wind", "range must satisfy 0 <= lo <= hi"));
        }
    }
    if let Some((lo, hi)) = s.perturbations.comms_cost {
        if !(0.0 <= lo && lo <= hi) {
            v.push(Violation::new(
                "perturbations.comms_cost",
                "range must satisfy 0 <= lo <= hi",
            ));
        }
    }
    if let Some(p) = s.perturbations.failure_prob {
        if !(0.0..=1.0).contains(&p) {
            v.push(Violation::new("perturbations.failure_prob", "must be in [0, 1]"));
        }
    }
    if let Some(q) = s.perturbations.match_loss_prob {
        if !(0.0..=1.0).contains(&q) {
            v.push(Violation::new("perturbations.match_loss_prob", "must be in [0, 1]"));
        }
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}
