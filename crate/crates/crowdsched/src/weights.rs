//! Node-weight machinery for the epoch conflict graph.
//!
//! All weights are benefits per minute of committed time. Pair weights put a
//! large fixed bonus over the slower leg's travel time so that task pairs
//! dominate charge pairs, which in turn dominate single-agent moves; the
//! residual `*_gain` terms rank options within a tier by how much a move
//! improves the mover's expected matching cost against the opposite side.

use crate::model::{
    ceil_to_interval, charge_feasible, distance, task_feasible, Area, ChargePoint, GridPoint,
    Task, Uav, Vehicle, WeightMode, Worker, EPS,
};

/// Affinities below this count as "never seeks that role" and contribute the
/// sentinel instead of dividing by ~zero.
const AFFINITY_FLOOR: f64 = 1e-12;

/// World state visible to the scheduler at one decision epoch: online idle
/// agents with their current position and power, pending tasks, and all
/// charging points. `limit_time` doubles as the sentinel cost for empty
/// candidate sets.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub now: f64,
    pub interval: f64,
    pub limit_time: f64,
    pub area: Area,
    pub uavs: Vec<Uav>,
    pub workers: Vec<Worker>,
    pub vehicles: Vec<Vehicle>,
    pub tasks: Vec<Task>,
    pub charges: Vec<ChargePoint>,
}

/// Expected matching costs, one entry per snapshot task / charge slot.
#[derive(Debug, Clone)]
pub struct CostTables {
    pub uav_to_task: Vec<f64>,
    pub worker_to_task: Vec<f64>,
    pub uav_to_charge: Vec<f64>,
    pub vehicle_to_charge: Vec<f64>,
}

pub fn softplus(x: f64) -> f64 {
    // max(x, 0) + ln(1 + e^-|x|) is stable for large |x|.
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// How keen a UAV is to take tasks: 0 when drained, 1 when full.
pub fn task_affinity(u: &Uav) -> f64 {
    assert!(u.full_power > 0.0, "uav {} has zero capacity", u.id);
    (1.0 - (-u.power / u.full_power).exp()) / (1.0 - (-1.0f64).exp())
}

/// How keen a UAV is to recharge: the task affinity mirrored, 1 when drained.
pub fn charge_affinity(u: &Uav) -> f64 {
    assert!(u.full_power > 0.0, "uav {} has zero capacity", u.id);
    (1.0 - (-(1.0 - u.power / u.full_power)).exp()) / (1.0 - (-1.0f64).exp())
}

fn travel_ceil(from: GridPoint, to: GridPoint, speed: f64, interval: f64) -> f64 {
    ceil_to_interval(distance(from, to) / speed, interval)
}

/// Mean cost for a task to attract a capable UAV: quantized travel time
/// inflated by low task affinity, averaged over the UAVs that could actually
/// finish the task. No candidates at all yields the sentinel.
pub fn expected_task_uav_cost(task: &Task, snap: &Snapshot) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for u in &snap.uavs {
        if !task_feasible(u, task, &snap.charges) {
            continue;
        }
        let t = travel_ceil(u.loc, task.loc, u.speed, snap.interval);
        let aff = task_affinity(u);
        sum += if aff > AFFINITY_FLOOR { t / aff } else { snap.limit_time };
        n += 1;
    }
    if n == 0 {
        snap.limit_time
    } else {
        sum / n as f64
    }
}

/// Mean quantized travel time for a worker to reach the task.
pub fn expected_task_worker_cost(task: &Task, snap: &Snapshot) -> f64 {
    if snap.workers.is_empty() {
        return snap.limit_time;
    }
    let sum: f64 = snap
        .workers
        .iter()
        .map(|w| travel_ceil(w.loc, task.loc, w.speed, snap.interval))
        .sum();
    sum / snap.workers.len() as f64
}

/// Mean cost for a charging point to attract a UAV in need. Fully charged
/// UAVs never seek charge, so they contribute the sentinel rather than a
/// division by zero.
pub fn expected_charge_uav_cost(charge: &ChargePoint, snap: &Snapshot) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for u in &snap.uavs {
        if !charge_feasible(u, charge) {
            continue;
        }
        let t = travel_ceil(u.loc, charge.loc, u.speed, snap.interval);
        let aff = charge_affinity(u);
        sum += if aff > AFFINITY_FLOOR { t / aff } else { snap.limit_time };
        n += 1;
    }
    if n == 0 {
        snap.limit_time
    } else {
        sum / n as f64
    }
}

/// Mean quantized travel time for a charging vehicle to reach the point.
pub fn expected_charge_vehicle_cost(charge: &ChargePoint, snap: &Snapshot) -> f64 {
    if snap.vehicles.is_empty() {
        return snap.limit_time;
    }
    let sum: f64 = snap
        .vehicles
        .iter()
        .map(|v| travel_ceil(v.loc, charge.loc, v.speed, snap.interval))
        .sum();
    sum / snap.vehicles.len() as f64
}

pub fn cost_tables(snap: &Snapshot) -> CostTables {
    CostTables {
        uav_to_task: snap.tasks.iter().map(|t| expected_task_uav_cost(t, snap)).collect(),
        worker_to_task: snap
            .tasks
            .iter()
            .map(|t| expected_task_worker_cost(t, snap))
            .collect(),
        uav_to_charge: snap
            .charges
            .iter()
            .map(|c| expected_charge_uav_cost(c, snap))
            .collect(),
        vehicle_to_charge: snap
            .charges
            .iter()
            .map(|c| expected_charge_vehicle_cost(c, snap))
            .collect(),
    }
}

/// Softmax over negated quantized travel times: nearer targets are more
/// likely choices. Empty target list yields an empty distribution.
pub fn choice_distribution(
    origin: GridPoint,
    speed: f64,
    targets: &[GridPoint],
    interval: f64,
) -> Vec<f64> {
    if targets.is_empty() {
        return Vec::new();
    }
    let scores: Vec<f64> = targets
        .iter()
        .map(|t| -travel_ceil(origin, *t, speed, interval))
        .collect();
    softmax(&scores)
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Probability-weighted expected cost of the targets selected by `keep`,
/// with the choice distribution taken from `origin`.
fn weighted_cost<F>(
    origin: GridPoint,
    speed: f64,
    interval: f64,
    locs: &[GridPoint],
    costs: &[f64],
    keep: F,
) -> Option<f64>
where
    F: Fn(usize) -> bool,
{
    let mut sel_locs = Vec::new();
    let mut sel_costs = Vec::new();
    for (i, loc) in locs.iter().enumerate() {
        if keep(i) {
            sel_locs.push(*loc);
            sel_costs.push(costs[i]);
        }
    }
    if sel_locs.is_empty() {
        return None;
    }
    let probs = choice_distribution(origin, speed, &sel_locs, interval);
    Some(probs.iter().zip(&sel_costs).map(|(p, c)| p * c).sum())
}

fn relative_reduction(before: f64, after: f64) -> f64 {
    (before - after) / before
}

/// Benefit per minute for a worker relocating to `new_loc`: softplus of the
/// relative drop in the tasks' expected UAV-matching cost, weighted by where
/// this worker would plausibly go, over the quantized move time.
pub fn worker_move_gain(
    w: &Worker,
    new_loc: GridPoint,
    tables: &CostTables,
    snap: &Snapshot,
) -> f64 {
    let locs: Vec<GridPoint> = snap.tasks.iter().map(|t| t.loc).collect();
    let before = match weighted_cost(w.loc, w.speed, snap.interval, &locs, &tables.uav_to_task, |_| true)
    {
        Some(x) => x,
        None => return 0.0,
    };
    let after = weighted_cost(new_loc, w.speed, snap.interval, &locs, &tables.uav_to_task, |_| true)
        .unwrap_or(0.0);
    softplus(relative_reduction(before, after)) / travel_ceil(w.loc, new_loc, w.speed, snap.interval)
}

/// Task-side benefit for a UAV relocating to `new_loc`. Candidate tasks are
/// re-filtered by round-trip feasibility at each endpoint, with the power
/// remaining after the move used at the destination.
pub fn uav_task_gain(u: &Uav, new_loc: GridPoint, tables: &CostTables, snap: &Snapshot) -> f64 {
    let locs: Vec<GridPoint> = snap.tasks.iter().map(|t| t.loc).collect();
    let before = match weighted_cost(
        u.loc,
        u.speed,
        snap.interval,
        &locs,
        &tables.worker_to_task,
        |i| task_feasible(u, &snap.tasks[i], &snap.charges),
    ) {
        Some(x) => x,
        None => return 0.0,
    };
    let moved = moved_uav(u, new_loc);
    // A destination from which no task is completable scores as if matching
    // cost hit the sentinel, not as if it dropped to zero.
    let after = weighted_cost(
        new_loc,
        u.speed,
        snap.interval,
        &locs,
        &tables.worker_to_task,
        |i| task_feasible(&moved, &snap.tasks[i], &snap.charges),
    )
    .unwrap_or(snap.limit_time);
    softplus(relative_reduction(before, after)) / travel_ceil(u.loc, new_loc, u.speed, snap.interval)
}

/// Charge-side benefit for a UAV relocating to `new_loc`, with reachability
/// re-checked at both endpoints.
pub fn uav_charge_gain(u: &Uav, new_loc: GridPoint, tables: &CostTables, snap: &Snapshot) -> f64 {
    let locs: Vec<GridPoint> = snap.charges.iter().map(|c| c.loc).collect();
    let before = match weighted_cost(
        u.loc,
        u.speed,
        snap.interval,
        &locs,
        &tables.vehicle_to_charge,
        |i| charge_feasible(u, &snap.charges[i]),
    ) {
        Some(x) => x,
        None => return 0.0,
    };
    let moved = moved_uav(u, new_loc);
    let after = weighted_cost(
        new_loc,
        u.speed,
        snap.interval,
        &locs,
        &tables.vehicle_to_charge,
        |i| charge_feasible(&moved, &snap.charges[i]),
    )
    .unwrap_or(snap.limit_time);
    softplus(relative_reduction(before, after)) / travel_ceil(u.loc, new_loc, u.speed, snap.interval)
}

fn moved_uav(u: &Uav, new_loc: GridPoint) -> Uav {
    let mut m = u.clone();
    m.power = (u.power - distance(u.loc, new_loc)).max(0.0);
    m.loc = new_loc;
    m
}

/// Blend of the task and charge gains for one UAV move, weighted by the
/// power remaining after the move: a full battery cares about tasks, an
/// empty one about charging.
pub fn uav_combined_gain(u: &Uav, new_loc: GridPoint, tables: &CostTables, snap: &Snapshot) -> f64 {
    let after = u.power - distance(u.loc, new_loc);
    assert!(after >= -EPS, "uav {} cannot reach target on current power", u.id);
    let after = after.max(0.0);
    let t = uav_task_gain(u, new_loc, tables, snap);
    let c = uav_charge_gain(u, new_loc, tables, snap);
    (after / u.full_power) * t + ((u.full_power - after) / u.full_power) * c
}

/// Benefit per minute for a vehicle relocating to `new_loc`, scored against
/// the charging points' expected UAV-matching costs.
pub fn vehicle_move_gain(
    v: &Vehicle,
    new_loc: GridPoint,
    tables: &CostTables,
    snap: &Snapshot,
) -> f64 {
    let locs: Vec<GridPoint> = snap.charges.iter().map(|c| c.loc).collect();
    let before = match weighted_cost(v.loc, v.speed, snap.interval, &locs, &tables.uav_to_charge, |_| true)
    {
        Some(x) => x,
        None => return 0.0,
    };
    let after = weighted_cost(new_loc, v.speed, snap.interval, &locs, &tables.uav_to_charge, |_| true)
        .unwrap_or(0.0);
    softplus(relative_reduction(before, after)) / travel_ceil(v.loc, new_loc, v.speed, snap.interval)
}

/// Weight of a joint UAV + worker task assignment: a flat bonus over the
/// slower leg's quantized travel time, plus both movers' gains.
pub fn pair_task_weight(
    u: &Uav,
    task: &Task,
    w: &Worker,
    tables: &CostTables,
    snap: &Snapshot,
    mode: WeightMode,
) -> f64 {
    let ceil_u = travel_ceil(u.loc, task.loc, u.speed, snap.interval);
    let ceil_w = travel_ceil(w.loc, task.loc, w.speed, snap.interval);
    let base = match mode {
        WeightMode::Hierarchical => softplus(100.0),
        WeightMode::Uniform => softplus(1.0),
    };
    base / ceil_u.max(ceil_w)
        + worker_move_gain(w, task.loc, tables, snap)
        + uav_combined_gain(u, task.loc, tables, snap)
}

/// Weight of a joint UAV + vehicle charging appointment. The bonus grows
/// with how depleted the UAV is, but stays an order of magnitude below the
/// task bonus.
pub fn pair_charge_weight(
    u: &Uav,
    charge: &ChargePoint,
    v: &Vehicle,
    tables: &CostTables,
    snap: &Snapshot,
    mode: WeightMode,
) -> f64 {
    let ceil_u = travel_ceil(u.loc, charge.loc, u.speed, snap.interval);
    let ceil_v = travel_ceil(v.loc, charge.loc, v.speed, snap.interval);
    let urgency = (1.0 - u.power / u.full_power).exp();
    let base = match mode {
        WeightMode::Hierarchical => softplus(10.0 + urgency),
        WeightMode::Uniform => softplus(urgency / std::f64::consts::E),
    };
    base / ceil_u.max(ceil_v)
        + vehicle_move_gain(v, charge.loc, tables, snap)
        + uav_combined_gain(u, charge.loc, tables, snap)
}
