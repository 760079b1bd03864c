//! Episode engine: epoch snapshots, schedule commitment, event-ordered state
//! advancement, opportunistic first-come-first-served charging, availability
//! windows, stochastic perturbations, and per-UAV energy ledgers.
//!
//! Time runs on two clocks. Decisions happen at epoch boundaries (multiples
//! of the interval); physical events (arrivals, task completions, charge
//! completions) land wherever the kinematics put them, and agents become
//! schedulable again at the first epoch at or after their action ends.

use crate::baselines::{greedy_step, kwta_step, KwtaParams};
use crate::graph::{build_epoch_graph, NodeKind, WeightedGraph};
use crate::ils::{solve_ils, IlsParams, Solution};
use crate::model::{
    ceil_to_interval, charge_feasible, distance, task_feasible, GridPoint, Scenario, EPS,
};
use crate::mpq::solve_mpq;
use crate::weights::Snapshot;
use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

/// Sub-stream of the episode seed feeding the solvers.
pub const SOLVER_STREAM: u64 = 1;
/// Sub-stream of the episode seed feeding perturbation draws.
pub const PERTURB_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Uav,
    Worker,
    Vehicle,
}

/// A committed decision for one or two agents, in scenario id space.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Stay { kind: AgentKind, id: usize },
    MoveTo { kind: AgentKind, id: usize, dest: GridPoint },
    TaskPair { uav: usize, task: usize, worker: usize },
    ChargePair { uav: usize, charge: usize, vehicle: usize },
}

impl Action {
    pub fn is_joint(&self) -> bool {
        matches!(self, Action::TaskPair { .. } | Action::ChargePair { .. })
    }

    pub fn agents(&self) -> Vec<(AgentKind, usize)> {
        match *self {
            Action::Stay { kind, id } | Action::MoveTo { kind, id, .. } => vec![(kind, id)],
            Action::TaskPair { uav, worker, .. } => {
                vec![(AgentKind::Uav, uav), (AgentKind::Worker, worker)]
            }
            Action::ChargePair { uav, vehicle, .. } => {
                vec![(AgentKind::Uav, uav), (AgentKind::Vehicle, vehicle)]
            }
        }
    }

    pub fn task(&self) -> Option<usize> {
        match *self {
            Action::TaskPair { task, .. } => Some(task),
            _ => None,
        }
    }

    /// Same resource rule as the conflict graph: a shared agent or a shared
    /// task conflicts, a shared charge point does not.
    pub fn conflicts_with(&self, other: &Action) -> bool {
        if let (Some(a), Some(b)) = (self.task(), other.task()) {
            if a == b {
                return true;
            }
        }
        let mine = self.agents();
        other.agents().iter().any(|a| mine.contains(a))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch_min: f64,
    pub decision_ms: f64,
    pub committed: usize,
    pub cumulative_completed: usize,
}

/// Every joule a UAV gained or lost, by cause. `start - end` must equal
/// `traveled + task_cost + drained - charged` to float precision.
#[derive(Debug, Clone, PartialEq)]
pub struct UavLedger {
    pub uav: usize,
    pub start_power: f64,
    pub end_power: f64,
    pub traveled: f64,
    pub task_cost: f64,
    pub drained: f64,
    pub charged: f64,
    pub min_power: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub records: Vec<EpochRecord>,
    pub completed_task_ids: Vec<usize>,
    pub completion_rate: f64,
    pub epochs: usize,
    /// A task-free scenario completes vacuously; the 1.0 rate carries this
    /// marker so reports can say so.
    pub no_tasks: bool,
    pub ledgers: Vec<UavLedger>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerKind {
    Mpq,
    Ils,
    Greedy,
    Kwta,
}

impl SchedulerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::Mpq => "mpq",
            SchedulerKind::Ils => "ils",
            SchedulerKind::Greedy => "greedy",
            SchedulerKind::Kwta => "kwta",
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpq" => Ok(SchedulerKind::Mpq),
            "ils" => Ok(SchedulerKind::Ils),
            "greedy" => Ok(SchedulerKind::Greedy),
            "kwta" => Ok(SchedulerKind::Kwta),
            other => bail!("unknown scheduler {other:?}; expected mpq, ils, greedy, or kwta"),
        }
    }
}

#[derive(Debug, Clone)]
struct Activity {
    offline: bool,
    busy_until: f64,
    /// When the agent last arrived at its current position; breaks ties in
    /// first-come-first-served charging.
    at_since: f64,
    /// Stay-puts occupy the interval for scheduling purposes but are
    /// interruptible: a staying vehicle at a charge point still serves
    /// arriving UAVs, and a staying drained UAV still accepts service.
    staying: bool,
}

impl Activity {
    fn fresh() -> Self {
        Activity { offline: false, busy_until: 0.0, at_since: 0.0, staying: false }
    }
}

#[derive(Debug)]
enum Ev {
    /// `travel`/`wind` are the nominal and surplus energy to deduct from a
    /// UAV on arrival; zero for agents without batteries.
    Arrive { kind: AgentKind, id: usize, dest: GridPoint, travel: f64, wind: f64 },
    TaskDone { uav: usize, task: usize },
    ChargeDone { uav: usize, vehicle: usize },
}

struct EvEntry {
    time: f64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for EvEntry {
    fn eq(&self, other: &Self) -> bool {
        self.time.to_bits() == other.time.to_bits() && self.seq == other.seq
    }
}
impl Eq for EvEntry {}
impl PartialOrd for EvEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for EvEntry {
    // reversed so the max-heap pops the earliest (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

enum Drain {
    Travel,
    TaskCost,
    Noise,
}

pub struct SimState {
    pub scenario: Scenario,
    pub now: f64,
    uav_act: Vec<Activity>,
    worker_act: Vec<Activity>,
    vehicle_act: Vec<Activity>,
    /// Tasks bound to an in-flight action; they leave the pending pool at
    /// commit so a later epoch cannot assign them twice.
    claimed: Vec<bool>,
    events: BinaryHeap<EvEntry>,
    seq: u64,
    pub ledgers: Vec<UavLedger>,
    pub violations: Vec<String>,
    clamp_energy: bool,
}

impl SimState {
    pub fn new(scenario: Scenario) -> Self {
        let ledgers = scenario
            .uavs
            .iter()
            .map(|u| UavLedger {
                uav: u.id,
                start_power: u.power,
                end_power: u.power,
                traveled: 0.0,
                task_cost: 0.0,
                drained: 0.0,
                charged: 0.0,
                min_power: u.power,
            })
            .collect();
        let clamp_energy = scenario.perturbations.energy_noise();
        SimState {
            uav_act: vec![Activity::fresh(); scenario.uavs.len()],
            worker_act: vec![Activity::fresh(); scenario.workers.len()],
            vehicle_act: vec![Activity::fresh(); scenario.vehicles.len()],
            claimed: vec![false; scenario.tasks.len()],
            events: BinaryHeap::new(),
            seq: 0,
            ledgers,
            violations: Vec::new(),
            clamp_energy,
            scenario,
            now: 0.0,
        }
    }

    fn act(&self, kind: AgentKind, id: usize) -> &Activity {
        match kind {
            AgentKind::Uav => &self.uav_act[id],
            AgentKind::Worker => &self.worker_act[id],
            AgentKind::Vehicle => &self.vehicle_act[id],
        }
    }

    fn act_mut(&mut self, kind: AgentKind, id: usize) -> &mut Activity {
        match kind {
            AgentKind::Uav => &mut self.uav_act[id],
            AgentKind::Worker => &mut self.worker_act[id],
            AgentKind::Vehicle => &mut self.vehicle_act[id],
        }
    }

    fn loc_of(&self, kind: AgentKind, id: usize) -> GridPoint {
        match kind {
            AgentKind::Uav => self.scenario.uavs[id].loc,
            AgentKind::Worker => self.scenario.workers[id].loc,
            AgentKind::Vehicle => self.scenario.vehicles[id].loc,
        }
    }

    fn speed_of(&self, kind: AgentKind, id: usize) -> f64 {
        match kind {
            AgentKind::Uav => self.scenario.uavs[id].speed,
            AgentKind::Worker => self.scenario.workers[id].speed,
            AgentKind::Vehicle => self.scenario.vehicles[id].speed,
        }
    }

    fn window_of(&self, kind: AgentKind, id: usize) -> (f64, f64) {
        match kind {
            AgentKind::Uav => (self.scenario.uavs[id].uptime, self.scenario.uavs[id].downtime),
            AgentKind::Worker => {
                (self.scenario.workers[id].uptime, self.scenario.workers[id].downtime)
            }
            AgentKind::Vehicle => {
                (self.scenario.vehicles[id].uptime, self.scenario.vehicles[id].downtime)
            }
        }
    }

    fn in_window(&self, kind: AgentKind, id: usize, t: f64) -> bool {
        let (up, down) = self.window_of(kind, id);
        up <= t && t < down
    }

    fn idle_at(&self, kind: AgentKind, id: usize, t: f64) -> bool {
        let a = self.act(kind, id);
        !a.offline && a.busy_until <= t + EPS
    }

    fn schedulable(&self, kind: AgentKind, id: usize, t: f64) -> bool {
        self.in_window(kind, id, t) && self.idle_at(kind, id, t)
    }

    /// Online idle agents at their live positions, pending tasks, all charge
    /// points.
    pub fn snapshot(&self, now: f64) -> Snapshot {
        let sc = &self.scenario;
        Snapshot {
            now,
            interval: sc.interval,
            limit_time: sc.limit_time,
            area: sc.area,
            uavs: sc
                .uavs
                .iter()
                .filter(|u| self.schedulable(AgentKind::Uav, u.id, now))
                .cloned()
                .collect(),
            workers: sc
                .workers
                .iter()
                .filter(|w| self.schedulable(AgentKind::Worker, w.id, now))
                .cloned()
                .collect(),
            vehicles: sc
                .vehicles
                .iter()
                .filter(|v| self.schedulable(AgentKind::Vehicle, v.id, now))
                .cloned()
                .collect(),
            tasks: sc
                .tasks
                .iter()
                .filter(|t| !t.completed && !self.claimed[t.id])
                .cloned()
                .collect(),
            charges: sc.charges.clone(),
        }
    }

    pub fn completed_count(&self) -> usize {
        self.scenario.tasks.iter().filter(|t| t.completed).count()
    }

    fn push_event(&mut self, time: f64, ev: Ev) {
        self.seq += 1;
        self.events.push(EvEntry { time, seq: self.seq, ev });
    }

    fn deduct(&mut self, uav: usize, amount: f64, cause: Drain) -> Result<()> {
        debug_assert!(amount >= 0.0);
        let slot = &mut self.scenario.uavs[uav];
        let applied = if self.clamp_energy { amount.min(slot.power.max(0.0)) } else { amount };
        slot.power -= applied;
        let led = &mut self.ledgers[uav];
        match cause {
            Drain::Travel => led.traveled += applied,
            Drain::TaskCost => led.task_cost += applied,
            Drain::Noise => led.drained += applied,
        }
        led.min_power = led.min_power.min(slot.power);
        if slot.power < -EPS {
            let msg = format!("uav {} power fell to {}", uav, slot.power);
            self.violations.push(msg.clone());
            bail!("invariant violation: {msg}");
        }
        Ok(())
    }

    fn charge_to_full(&mut self, uav: usize) {
        let slot = &mut self.scenario.uavs[uav];
        let gain = slot.full_power - slot.power;
        slot.power = slot.full_power;
        self.ledgers[uav].charged += gain;
    }

    fn stay(&mut self, kind: AgentKind, id: usize, now: f64) {
        let interval = self.scenario.interval;
        let a = self.act_mut(kind, id);
        a.busy_until = now + interval;
        a.staying = true;
    }

    fn at_charge_point(&self, loc: GridPoint) -> bool {
        self.scenario.charges.iter().any(|c| distance(c.loc, loc) < EPS)
    }

    /// Idle or merely staying put, online, inside the window: able to take
    /// part in mid-epoch charging service.
    fn free_for_charging(&self, kind: AgentKind, id: usize, t: f64) -> bool {
        let a = self.act(kind, id);
        !a.offline && self.in_window(kind, id, t) && (a.busy_until <= t + EPS || a.staying)
    }

    /// Pairs waiting UAVs with free vehicles at one charge point, earliest
    /// arrival first, until either side runs out.
    fn match_charging_at(&mut self, loc: GridPoint, t: f64) {
        loop {
            let uav = self
                .scenario
                .uavs
                .iter()
                .filter(|u| {
                    distance(u.loc, loc) < EPS
                        && u.power < u.full_power - EPS
                        && self.free_for_charging(AgentKind::Uav, u.id, t)
                })
                .min_by(|a, b| {
                    let (sa, sb) = (self.uav_act[a.id].at_since, self.uav_act[b.id].at_since);
                    sa.total_cmp(&sb).then(a.id.cmp(&b.id))
                })
                .map(|u| u.id);
            let vehicle = self
                .scenario
                .vehicles
                .iter()
                .filter(|v| {
                    distance(v.loc, loc) < EPS
                        && self.free_for_charging(AgentKind::Vehicle, v.id, t)
                })
                .min_by(|a, b| {
                    let (sa, sb) =
                        (self.vehicle_act[a.id].at_since, self.vehicle_act[b.id].at_since);
                    sa.total_cmp(&sb).then(a.id.cmp(&b.id))
                })
                .map(|v| v.id);
            match (uav, vehicle) {
                (Some(u), Some(v)) => {
                    let need = self.scenario.uavs[u].full_power - self.scenario.uavs[u].power;
                    let done = t + need / self.scenario.vehicles[v].charge_power;
                    self.uav_act[u].busy_until = done;
                    self.uav_act[u].staying = false;
                    self.vehicle_act[v].busy_until = done;
                    self.vehicle_act[v].staying = false;
                    self.push_event(done, Ev::ChargeDone { uav: u, vehicle: v });
                }
                _ => return,
            }
        }
    }

    /// Commits one epoch's schedule. Audits feasibility, applies match-loss
    /// voiding, draws wind surpluses, books events, and gives every other
    /// schedulable agent a stay-put. Returns the number of scheduler actions
    /// that took effect (voided ones excluded, default stays not counted).
    pub fn commit_schedule(
        &mut self,
        schedule: &Schedule,
        now: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        for (i, a) in schedule.actions.iter().enumerate() {
            for b in schedule.actions.iter().skip(i + 1) {
                if a.conflicts_with(b) {
                    bail!("conflicting committed actions: {a:?} / {b:?}");
                }
            }
            for (kind, id) in a.agents() {
                if !self.schedulable(kind, id, now) {
                    bail!("agent {kind:?} {id} is not schedulable at {now} for {a:?}");
                }
            }
        }

        let match_loss = self.scenario.perturbations.match_loss_prob;
        let wind = self.scenario.perturbations.wind;
        let mut committed = 0usize;
        for action in &schedule.actions {
            if action.is_joint() {
                if let Some(q) = match_loss {
                    if rng.gen::<f64>() < q {
                        for (kind, id) in action.agents() {
                            self.stay(kind, id, now);
                        }
                        continue;
                    }
                }
            }
            committed += 1;
            self.commit_action(action, now, wind, rng)?;
        }

        // everyone the schedule left out stands still for one interval
        for kind in [AgentKind::Uav, AgentKind::Worker, AgentKind::Vehicle] {
            let n = match kind {
                AgentKind::Uav => self.scenario.uavs.len(),
                AgentKind::Worker => self.scenario.workers.len(),
                AgentKind::Vehicle => self.scenario.vehicles.len(),
            };
            for id in 0..n {
                if self.schedulable(kind, id, now) {
                    self.stay(kind, id, now);
                }
            }
        }
        Ok(committed)
    }

    fn wind_surplus(
        &self,
        wind: Option<(f64, f64)>,
        dist: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        match wind {
            Some((lo, hi)) if dist > EPS => dist * rng.gen_range(lo..=hi),
            _ => 0.0,
        }
    }

    fn commit_action(
        &mut self,
        action: &Action,
        now: f64,
        wind: Option<(f64, f64)>,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let interval = self.scenario.interval;
        match *action {
            Action::Stay { kind, id } => self.stay(kind, id, now),
            Action::MoveTo { kind, id, dest } => {
                let from = self.loc_of(kind, id);
                let d = distance(from, dest);
                if kind == AgentKind::Uav && d > self.scenario.uavs[id].power + EPS {
                    self.violations
                        .push(format!("epoch {now}: uav {id} sent {d} km with {} power", self.scenario.uavs[id].power));
                }
                let arrive = now + d / self.speed_of(kind, id);
                let a = self.act_mut(kind, id);
                a.busy_until = arrive;
                a.staying = false;
                let (travel, extra) = if kind == AgentKind::Uav {
                    (d, self.wind_surplus(wind, d, rng))
                } else {
                    (0.0, 0.0)
                };
                self.push_event(arrive, Ev::Arrive { kind, id, dest, travel, wind: extra });
            }
            Action::TaskPair { uav, task, worker } => {
                let u = self.scenario.uavs[uav].clone();
                let w = self.scenario.workers[worker].clone();
                let t = self.scenario.tasks[task].clone();
                if !task_feasible(&u, &t, &self.scenario.charges) {
                    self.violations
                        .push(format!("epoch {now}: infeasible task pair uav {uav} task {task}"));
                }
                if t.completed || self.claimed[task] {
                    bail!("task {task} assigned while already {}", if t.completed { "completed" } else { "claimed" });
                }
                let d_u = distance(u.loc, t.loc);
                let d_w = distance(w.loc, t.loc);
                let sync = ceil_to_interval(d_u / u.speed, interval)
                    .max(ceil_to_interval(d_w / w.speed, interval));
                let done = now + sync + t.cost_power / u.speed;
                self.uav_act[uav].busy_until = done;
                self.uav_act[uav].staying = false;
                self.worker_act[worker].busy_until = done;
                self.worker_act[worker].staying = false;
                self.claimed[task] = true;
                let extra = self.wind_surplus(wind, d_u, rng);
                self.push_event(
                    now + d_u / u.speed,
                    Ev::Arrive { kind: AgentKind::Uav, id: uav, dest: t.loc, travel: d_u, wind: extra },
                );
                self.push_event(
                    now + d_w / w.speed,
                    Ev::Arrive { kind: AgentKind::Worker, id: worker, dest: t.loc, travel: 0.0, wind: 0.0 },
                );
                self.push_event(done, Ev::TaskDone { uav, task });
            }
            Action::ChargePair { uav, charge, vehicle } => {
                let u = self.scenario.uavs[uav].clone();
                let v = self.scenario.vehicles[vehicle].clone();
                let c = self.scenario.charges[charge].clone();
                if !charge_feasible(&u, &c) {
                    self.violations
                        .push(format!("epoch {now}: infeasible charge pair uav {uav} charge {charge}"));
                }
                let d_u = distance(u.loc, c.loc);
                let d_v = distance(v.loc, c.loc);
                let sync = ceil_to_interval(d_u / u.speed, interval)
                    .max(ceil_to_interval(d_v / v.speed, interval));
                // planned on nominal consumption; the completion grants a
                // full battery regardless of what wind did in between
                let after_travel = (u.power - d_u).max(0.0);
                let done = now + sync + (u.full_power - after_travel) / v.charge_power;
                self.uav_act[uav].busy_until = done;
                self.uav_act[uav].staying = false;
                self.vehicle_act[vehicle].busy_until = done;
                self.vehicle_act[vehicle].staying = false;
                let extra = self.wind_surplus(wind, d_u, rng);
                self.push_event(
                    now + d_u / u.speed,
                    Ev::Arrive { kind: AgentKind::Uav, id: uav, dest: c.loc, travel: d_u, wind: extra },
                );
                self.push_event(
                    now + d_v / v.speed,
                    Ev::Arrive { kind: AgentKind::Vehicle, id: vehicle, dest: c.loc, travel: 0.0, wind: 0.0 },
                );
                self.push_event(done, Ev::ChargeDone { uav, vehicle });
            }
        }
        Ok(())
    }

    /// Processes all events up to `to`, then failure draws and downtime
    /// flips for idle agents, and moves the clock.
    pub fn advance(&mut self, to: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        while let Some(top) = self.events.peek() {
            if top.time > to + EPS {
                break;
            }
            let entry = self.events.pop().unwrap();
            self.process(entry.time, entry.ev)?;
        }

        if let Some(p) = self.scenario.perturbations.failure_prob {
            for kind in [AgentKind::Uav, AgentKind::Worker, AgentKind::Vehicle] {
                let n = match kind {
                    AgentKind::Uav => self.scenario.uavs.len(),
                    AgentKind::Worker => self.scenario.workers.len(),
                    AgentKind::Vehicle => self.scenario.vehicles.len(),
                };
                for id in 0..n {
                    if self.schedulable(kind, id, to) && rng.gen::<f64>() < p {
                        self.act_mut(kind, id).offline = true;
                    }
                }
            }
        }

        for kind in [AgentKind::Uav, AgentKind::Worker, AgentKind::Vehicle] {
            let n = match kind {
                AgentKind::Uav => self.scenario.uavs.len(),
                AgentKind::Worker => self.scenario.workers.len(),
                AgentKind::Vehicle => self.scenario.vehicles.len(),
            };
            for id in 0..n {
                let (_, down) = self.window_of(kind, id);
                if down <= to && self.idle_at(kind, id, to) {
                    self.act_mut(kind, id).offline = true;
                }
            }
        }

        self.now = to;
        Ok(())
    }

    fn set_loc(&mut self, kind: AgentKind, id: usize, dest: GridPoint, t: f64) {
        match kind {
            AgentKind::Uav => self.scenario.uavs[id].loc = dest,
            AgentKind::Worker => self.scenario.workers[id].loc = dest,
            AgentKind::Vehicle => self.scenario.vehicles[id].loc = dest,
        }
        self.act_mut(kind, id).at_since = t;
    }

    fn process(&mut self, t: f64, ev: Ev) -> Result<()> {
        match ev {
            Ev::Arrive { kind, id, dest, travel, wind } => {
                self.set_loc(kind, id, dest, t);
                if travel > 0.0 {
                    self.deduct(id, travel, Drain::Travel)?;
                }
                if wind > 0.0 {
                    self.deduct(id, wind, Drain::Noise)?;
                }
                // a mid-epoch arrival can complete a charging rendezvous
                // without waiting for the next decision
                if kind != AgentKind::Worker
                    && self.at_charge_point(dest)
                    && self.free_for_charging(kind, id, t)
                {
                    self.match_charging_at(dest, t);
                }
            }
            Ev::TaskDone { uav, task } => {
                if self.scenario.tasks[task].completed {
                    self.violations.push(format!("task {task} completed twice"));
                } else {
                    self.scenario.tasks[task].completed = true;
                    let cost = self.scenario.tasks[task].cost_power;
                    self.deduct(uav, cost, Drain::TaskCost)?;
                }
            }
            Ev::ChargeDone { uav, vehicle } => {
                self.charge_to_full(uav);
                // the vehicle is free again; serve whoever queued up
                let loc = self.scenario.vehicles[vehicle].loc;
                if self.free_for_charging(AgentKind::Vehicle, vehicle, t) {
                    self.match_charging_at(loc, t);
                }
            }
        }
        Ok(())
    }

    fn finish_ledgers(&mut self) {
        for u in &self.scenario.uavs {
            self.ledgers[u.id].end_power = u.power;
        }
    }
}

/// Translates solver output (snapshot-indexed graph nodes) into scenario-id
/// actions with concrete destinations.
pub fn schedule_from_solution(snap: &Snapshot, g: &WeightedGraph, sol: &Solution) -> Schedule {
    let actions = sol
        .members
        .iter()
        .map(|&n| match g.nodes[n].kind {
            NodeKind::UavStay { uav } => {
                Action::Stay { kind: AgentKind::Uav, id: snap.uavs[uav].id }
            }
            NodeKind::WorkerStay { worker } => {
                Action::Stay { kind: AgentKind::Worker, id: snap.workers[worker].id }
            }
            NodeKind::VehicleStay { vehicle } => {
                Action::Stay { kind: AgentKind::Vehicle, id: snap.vehicles[vehicle].id }
            }
            NodeKind::UavToTask { uav, task } => Action::MoveTo {
                kind: AgentKind::Uav,
                id: snap.uavs[uav].id,
                dest: snap.tasks[task].loc,
            },
            NodeKind::WorkerToTask { worker, task } => Action::MoveTo {
                kind: AgentKind::Worker,
                id: snap.workers[worker].id,
                dest: snap.tasks[task].loc,
            },
            NodeKind::UavToCharge { uav, charge } => Action::MoveTo {
                kind: AgentKind::Uav,
                id: snap.uavs[uav].id,
                dest: snap.charges[charge].loc,
            },
            NodeKind::VehicleToCharge { vehicle, charge } => Action::MoveTo {
                kind: AgentKind::Vehicle,
                id: snap.vehicles[vehicle].id,
                dest: snap.charges[charge].loc,
            },
            NodeKind::TaskPair { uav, task, worker } => Action::TaskPair {
                uav: snap.uavs[uav].id,
                task: snap.tasks[task].id,
                worker: snap.workers[worker].id,
            },
            NodeKind::ChargePair { uav, charge, vehicle } => Action::ChargePair {
                uav: snap.uavs[uav].id,
                charge: snap.charges[charge].id,
                vehicle: snap.vehicles[vehicle].id,
            },
        })
        .collect();
    Schedule { actions }
}

fn decide(
    scheduler: SchedulerKind,
    snap: &Snapshot,
    mode: crate::model::WeightMode,
    solver_rng: &mut ChaCha8Rng,
    kwta: &KwtaParams,
) -> (Schedule, f64) {
    match scheduler {
        SchedulerKind::Greedy => {
            let t0 = Instant::now();
            let s = greedy_step(snap);
            (s, t0.elapsed().as_secs_f64() * 1e3)
        }
        SchedulerKind::Kwta => {
            let t0 = Instant::now();
            let s = kwta_step(snap, kwta);
            (s, t0.elapsed().as_secs_f64() * 1e3)
        }
        SchedulerKind::Ils => {
            let g = build_epoch_graph(snap, mode);
            let params = IlsParams { seed: solver_rng.gen(), ..IlsParams::default() };
            let t0 = Instant::now();
            let sol = solve_ils(&g, &params, None);
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            (schedule_from_solution(snap, &g, &sol), ms)
        }
        SchedulerKind::Mpq => {
            let g = build_epoch_graph(snap, mode);
            let params = IlsParams::embedded(solver_rng.gen());
            let seed = solver_rng.gen();
            let t0 = Instant::now();
            let sol = solve_mpq(&g, &params, seed);
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            (schedule_from_solution(snap, &g, &sol), ms)
        }
    }
}

/// Runs one full episode: snapshot, decide, commit, advance, for every epoch
/// in the horizon. Decision times cover the solver call only; graph
/// construction and bookkeeping are excluded.
pub fn run_episode(
    scenario: &Scenario,
    scheduler: SchedulerKind,
    seed: u64,
) -> Result<EpisodeResult> {
    if let Err(violations) = crate::model::validate_scenario(scenario) {
        bail!(
            "invalid scenario: {}",
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
        );
    }
    let mut state = SimState::new(scenario.clone());
    let mut solver_rng = ChaCha8Rng::seed_from_u64(seed);
    solver_rng.set_stream(SOLVER_STREAM);
    let mut pert_rng = ChaCha8Rng::seed_from_u64(seed);
    pert_rng.set_stream(PERTURB_STREAM);
    let kwta = KwtaParams::default();

    let initially_done: Vec<usize> =
        scenario.tasks.iter().filter(|t| t.completed).map(|t| t.id).collect();
    let comms = scenario.perturbations.comms_cost;
    let mut records = Vec::new();
    let mut epoch = 0usize;
    loop {
        let t = epoch as f64 * scenario.interval;
        if t > scenario.limit_time - scenario.interval + EPS {
            break;
        }
        if let Some((lo, hi)) = comms {
            for id in 0..state.scenario.uavs.len() {
                if !state.uav_act[id].offline && state.in_window(AgentKind::Uav, id, t) {
                    let delta = pert_rng.gen_range(lo..=hi);
                    state.deduct(id, delta, Drain::Noise)?;
                }
            }
        }
        let snap = state.snapshot(t);
        let (schedule, decision_ms) =
            decide(scheduler, &snap, scenario.weight_mode, &mut solver_rng, &kwta);
        let committed = state.commit_schedule(&schedule, t, &mut pert_rng)?;
        state.advance(t + scenario.interval, &mut pert_rng)?;
        records.push(EpochRecord {
            epoch_min: t,
            decision_ms,
            committed,
            cumulative_completed: state.completed_count() - initially_done.len(),
        });
        epoch += 1;
    }
    state.finish_ledgers();

    let mut completed_task_ids: Vec<usize> = state
        .scenario
        .tasks
        .iter()
        .filter(|t| t.completed && !initially_done.contains(&t.id))
        .map(|t| t.id)
        .collect();
    completed_task_ids.sort_unstable();
    let no_tasks = scenario.tasks.is_empty();
    let completion_rate = if no_tasks {
        1.0
    } else {
        completed_task_ids.len() as f64 / scenario.tasks.len() as f64
    };
    Ok(EpisodeResult {
        epochs: records.len(),
        records,
        completed_task_ids,
        completion_rate,
        no_tasks,
        ledgers: state.ledgers,
        violations: state.violations,
    })
}
