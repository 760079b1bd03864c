//! Random scenario construction.
//!
//! Entities are placed on the centers of 1 km grid cells, tasks and agents
//! independently, charging points on distinct cells. Placement on cell
//! centers keeps co-location an achievable event for schedulers that move
//! agents cell by cell rather than to arbitrary coordinates.

use crate::model::{
    validate_scenario, Area, ChargePoint, GridPoint, PerturbationConfig, Scenario, Task, Uav,
    Vehicle, WeightMode, Worker,
};
use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sub-stream of the scenario seed reserved for generation; solvers and
/// perturbation draws use their own streams so adding one consumer never
/// shifts another's sequence.
pub const GEN_STREAM: u64 = 0;

#[derive(Debug, Clone)]
pub struct GenParams {
    pub width: usize,
    pub height: usize,
    pub tasks: usize,
    pub charges: usize,
    pub workers: usize,
    pub uavs: usize,
    pub vehicles: usize,
    /// length of every agent's availability window; set equal to
    /// `limit_time` for always-on agents
    pub online_minutes: f64,
    /// inclusive range; use equal endpoints for a fixed value
    pub task_cost: (f64, f64),
    pub charge_power: (f64, f64),
    pub interval: f64,
    pub limit_time: f64,
    pub uav_speed: f64,
    pub worker_speed: f64,
    pub vehicle_speed: f64,
    pub full_power: f64,
    pub weight_mode: WeightMode,
    pub perturbations: PerturbationConfig,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            width: 30,
            height: 30,
            tasks: 120,
            charges: 20,
            workers: 50,
            uavs: 30,
            vehicles: 20,
            online_minutes: 60.0,
            task_cost: (3.0, 3.0),
            charge_power: (10.0, 10.0),
            interval: 10.0,
            limit_time: 180.0,
            uav_speed: 1.0,
            worker_speed: 0.5,
            vehicle_speed: 1.0,
            full_power: 30.0,
            weight_mode: WeightMode::Hierarchical,
            perturbations: PerturbationConfig::default(),
            seed: 0,
        }
    }
}

fn cell_center(idx: usize, width: usize) -> GridPoint {
    GridPoint::new((idx % width) as f64 + 0.5, (idx / width) as f64 + 0.5)
}

pub fn generate(params: &GenParams) -> Result<Scenario> {
    let cells = params.width * params.height;
    if params.charges > cells {
        bail!(
            "{} charging points cannot occupy distinct cells of a {}x{} area",
            params.charges,
            params.width,
            params.height
        );
    }
    if params.online_minutes > params.limit_time {
        bail!("online window exceeds the horizon");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(GEN_STREAM);

    let random_cell = |rng: &mut ChaCha8Rng| cell_center(rng.gen_range(0..cells), params.width);
    let window = |rng: &mut ChaCha8Rng| {
        let uptime = rng.gen_range(0.0..=(params.limit_time - params.online_minutes));
        (uptime, uptime + params.online_minutes)
    };

    let tasks = (0..params.tasks)
        .map(|id| Task {
            id,
            loc: random_cell(&mut rng),
            cost_power: rng.gen_range(params.task_cost.0..=params.task_cost.1),
            completed: false,
        })
        .collect();

    let charges = rand::seq::index::sample(&mut rng, cells, params.charges)
        .iter()
        .enumerate()
        .map(|(id, cell)| ChargePoint { id, loc: cell_center(cell, params.width) })
        .collect();

    let workers = (0..params.workers)
        .map(|id| {
            let (uptime, downtime) = window(&mut rng);
            Worker { id, loc: random_cell(&mut rng), speed: params.worker_speed, uptime, downtime }
        })
        .collect();

    let uavs = (0..params.uavs)
        .map(|id| {
            let (uptime, downtime) = window(&mut rng);
            Uav {
                id,
                loc: random_cell(&mut rng),
                speed: params.uav_speed,
                full_power: params.full_power,
                power: params.full_power,
                uptime,
                downtime,
            }
        })
        .collect();

    let vehicles = (0..params.vehicles)
        .map(|id| {
            let (uptime, downtime) = window(&mut rng);
            Vehicle {
                id,
                loc: random_cell(&mut rng),
                speed: params.vehicle_speed,
                charge_power: rng.gen_range(params.charge_power.0..=params.charge_power.1),
                uptime,
                downtime,
            }
        })
        .collect();

    let scenario = Scenario {
        area: Area { width: params.width as f64, height: params.height as f64 },
        uavs,
        workers,
        vehicles,
        tasks,
        charges,
        interval: params.interval,
        limit_time: params.limit_time,
        weight_mode: params.weight_mode,
        perturbations: params.perturbations.clone(),
        seed: params.seed,
    };
    if let Err(violations) = validate_scenario(&scenario) {
        let listing: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        bail!("generated scenario fails validation: {}", listing.join("; "));
    }
    Ok(scenario)
}

/// Parses "3" as a fixed value and "2:3" as an inclusive range.
pub fn parse_range(text: &str) -> Result<(f64, f64)> {
    let parse = |s: &str| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}"));
    match text.split_once(':') {
        Some((lo, hi)) => {
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            if lo > hi {
                bail!("range {text:?} is empty");
            }
            Ok((lo, hi))
        }
        None => {
            let v = parse(text)?;
            Ok((v, v))
        }
    }
}
