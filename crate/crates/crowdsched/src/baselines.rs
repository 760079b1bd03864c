//! Position-based reference schedulers. Both work directly on the epoch
//! snapshot without building the conflict graph, which makes them fast and
//! blind to most of the coordination structure.

use crate::model::{charge_feasible, distance, task_feasible, GridPoint, EPS};
use crate::sim::{Action, AgentKind, Schedule};
use crate::weights::Snapshot;

/// Index-ordered centers of every 1 km grid cell in the area.
fn cell_centers(snap: &Snapshot) -> Vec<GridPoint> {
    let w = snap.area.width.round().max(1.0) as usize;
    let h = snap.area.height.round().max(1.0) as usize;
    let mut cells = Vec::with_capacity(w * h);
    for cy in 0..h {
        for cx in 0..w {
            cells.push(GridPoint::new(cx as f64 + 0.5, cy as f64 + 0.5));
        }
    }
    cells
}

/// Lowest-index cell within `reach` of `from` minimizing `score`. Falls back
/// to the current position when nothing is in range.
fn best_cell<F: Fn(GridPoint) -> f64>(
    cells: &[GridPoint],
    from: GridPoint,
    reach: f64,
    score: F,
) -> GridPoint {
    let mut best = None;
    for &cell in cells {
        if distance(from, cell) > reach + EPS {
            continue;
        }
        let s = score(cell);
        if best.map_or(true, |(bs, _)| s < bs) {
            best = Some((s, cell));
        }
    }
    best.map_or(from, |(_, cell)| cell)
}

/// Every agent independently walks toward the reachable cell closest to the
/// remaining work: UAVs and workers minimize summed distance to pending
/// tasks, vehicles chase where the UAVs are headed. Pairs form only when the
/// independent walks happen to converge on the same cell.
pub fn greedy_step(snap: &Snapshot) -> Schedule {
    if snap.tasks.is_empty() {
        return Schedule::default();
    }
    let cells = cell_centers(snap);
    let task_pull = |cell: GridPoint| snap.tasks.iter().map(|t| distance(cell, t.loc)).sum::<f64>();

    let uav_dest: Vec<GridPoint> = snap
        .uavs
        .iter()
        .map(|u| best_cell(&cells, u.loc, (u.speed * snap.interval).min(u.power), task_pull))
        .collect();
    let worker_dest: Vec<GridPoint> = snap
        .workers
        .iter()
        .map(|w| best_cell(&cells, w.loc, w.speed * snap.interval, task_pull))
        .collect();
    let vehicle_dest: Vec<GridPoint> = snap
        .vehicles
        .iter()
        .map(|v| {
            if uav_dest.is_empty() {
                return v.loc;
            }
            best_cell(&cells, v.loc, v.speed * snap.interval, |cell| {
                uav_dest.iter().map(|&d| distance(cell, d)).sum::<f64>()
            })
        })
        .collect();

    let mut uav_used = vec![false; snap.uavs.len()];
    let mut worker_used = vec![false; snap.workers.len()];
    let mut vehicle_used = vec![false; snap.vehicles.len()];
    let mut actions = Vec::new();

    // one pair per task: the first feasible uav and first worker that both
    // picked the task's cell
    for t in &snap.tasks {
        let iu = snap.uavs.iter().enumerate().position(|(i, u)| {
            !uav_used[i]
                && distance(uav_dest[i], t.loc) < EPS
                && task_feasible(u, t, &snap.charges)
        });
        let iw = (0..snap.workers.len())
            .find(|&i| !worker_used[i] && distance(worker_dest[i], t.loc) < EPS);
        if let (Some(iu), Some(iw)) = (iu, iw) {
            uav_used[iu] = true;
            worker_used[iw] = true;
            actions.push(Action::TaskPair {
                uav: snap.uavs[iu].id,
                task: t.id,
                worker: snap.workers[iw].id,
            });
        }
    }

    // charge points serve any number of pairs, so zip all arrivals
    for c in &snap.charges {
        let us: Vec<usize> = snap
            .uavs
            .iter()
            .enumerate()
            .filter(|(i, u)| {
                !uav_used[*i]
                    && distance(uav_dest[*i], c.loc) < EPS
                    && u.power < u.full_power - EPS
                    && charge_feasible(u, c)
            })
            .map(|(i, _)| i)
            .collect();
        let vs: Vec<usize> = (0..snap.vehicles.len())
            .filter(|&i| !vehicle_used[i] && distance(vehicle_dest[i], c.loc) < EPS)
            .collect();
        for (&iu, &iv) in us.iter().zip(vs.iter()) {
            uav_used[iu] = true;
            vehicle_used[iv] = true;
            actions.push(Action::ChargePair {
                uav: snap.uavs[iu].id,
                charge: c.id,
                vehicle: snap.vehicles[iv].id,
            });
        }
    }

    for (i, u) in snap.uavs.iter().enumerate() {
        if !uav_used[i] && distance(u.loc, uav_dest[i]) > EPS {
            actions.push(Action::MoveTo { kind: AgentKind::Uav, id: u.id, dest: uav_dest[i] });
        }
    }
    for (i, w) in snap.workers.iter().enumerate() {
        if !worker_used[i] && distance(w.loc, worker_dest[i]) > EPS {
            actions
                .push(Action::MoveTo { kind: AgentKind::Worker, id: w.id, dest: worker_dest[i] });
        }
    }
    for (i, v) in snap.vehicles.iter().enumerate() {
        if !vehicle_used[i] && distance(v.loc, vehicle_dest[i]) > EPS {
            actions
                .push(Action::MoveTo { kind: AgentKind::Vehicle, id: v.id, dest: vehicle_dest[i] });
        }
    }
    Schedule { actions }
}

#[derive(Debug, Clone)]
pub struct KwtaParams {
    /// How many top-scored targets stay active per agent.
    pub k: usize,
    /// UAVs at or above this fraction of full battery chase tasks, the rest
    /// charge. `None` splits on whether the nearest pending task is still
    /// feasible for the battery.
    pub power_split: Option<f64>,
}

impl Default for KwtaParams {
    fn default() -> Self {
        KwtaParams { k: 5, power_split: None }
    }
}

/// (target index, score) pairs, best first, truncated to k. Score is
/// negative travel minutes, so nearer targets win.
fn top_k<F: Fn(usize) -> Option<f64>>(n: usize, k: usize, score: F) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = (0..n).filter_map(|i| score(i).map(|s| (i, s))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Competition-style matcher. Each partner agent (worker or vehicle) keeps
/// only its k nearest targets and can be matched nowhere else. Each UAV walks
/// its feasible targets best-first, the k retained ones and then the rest in
/// descending score, and pairs with the best free partner that kept that
/// target. UAVs that intersect nobody are left out of the schedule.
pub fn kwta_step(snap: &Snapshot, params: &KwtaParams) -> Schedule {
    let k = params.k.max(1);
    let mut actions = Vec::new();

    let mut task_side = Vec::new();
    let mut charge_side = Vec::new();
    for (i, u) in snap.uavs.iter().enumerate() {
        let chase_tasks = match params.power_split {
            Some(frac) => u.power >= frac * u.full_power && !snap.tasks.is_empty(),
            None => snap
                .tasks
                .iter()
                .min_by(|a, b| distance(u.loc, a.loc).total_cmp(&distance(u.loc, b.loc)))
                .is_some_and(|t| task_feasible(u, t, &snap.charges)),
        };
        if chase_tasks {
            task_side.push(i);
        } else if u.power < u.full_power - EPS {
            charge_side.push(i);
        }
    }

    let mut task_used = vec![false; snap.tasks.len()];
    let mut worker_used = vec![false; snap.workers.len()];
    let worker_cand: Vec<Vec<(usize, f64)>> = snap
        .workers
        .iter()
        .map(|w| top_k(snap.tasks.len(), k, |ti| Some(-distance(w.loc, snap.tasks[ti].loc) / w.speed)))
        .collect();
    for &ui in &task_side {
        let u = &snap.uavs[ui];
        // full descending-score list: entries past k are the fallback tier
        let cand = top_k(snap.tasks.len(), snap.tasks.len(), |ti| {
            let t = &snap.tasks[ti];
            task_feasible(u, t, &snap.charges).then(|| -distance(u.loc, t.loc) / u.speed)
        });
        let mut chosen = None;
        for &(ti, _) in &cand {
            if task_used[ti] {
                continue;
            }
            let best = (0..snap.workers.len())
                .filter(|&wi| !worker_used[wi])
                .filter_map(|wi| {
                    worker_cand[wi].iter().find(|&&(t, _)| t == ti).map(|&(_, s)| (wi, s))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((wi, _)) = best {
                chosen = Some((ti, wi));
                break;
            }
        }
        if let Some((ti, wi)) = chosen {
            task_used[ti] = true;
            worker_used[wi] = true;
            actions.push(Action::TaskPair {
                uav: u.id,
                task: snap.tasks[ti].id,
                worker: snap.workers[wi].id,
            });
        }
    }

    let mut vehicle_used = vec![false; snap.vehicles.len()];
    let vehicle_cand: Vec<Vec<(usize, f64)>> = snap
        .vehicles
        .iter()
        .map(|v| {
            top_k(snap.charges.len(), k, |ci| {
                Some(-distance(v.loc, snap.charges[ci].loc) / v.speed)
            })
        })
        .collect();
    for &ui in &charge_side {
        let u = &snap.uavs[ui];
        let cand = top_k(snap.charges.len(), snap.charges.len(), |ci| {
            let c = &snap.charges[ci];
            charge_feasible(u, c).then(|| -distance(u.loc, c.loc) / u.speed)
        });
        let mut chosen = None;
        for &(ci, _) in &cand {
            let best = (0..snap.vehicles.len())
                .filter(|&vi| !vehicle_used[vi])
                .filter_map(|vi| {
                    vehicle_cand[vi].iter().find(|&&(c, _)| c == ci).map(|&(_, s)| (vi, s))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((vi, _)) = best {
                chosen = Some((ci, vi));
                break;
            }
        }
        if let Some((ci, vi)) = chosen {
            vehicle_used[vi] = true;
            actions.push(Action::ChargePair {
                uav: u.id,
                charge: snap.charges[ci].id,
                vehicle: snap.vehicles[vi].id,
            });
        }
    }

    Schedule { actions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Area, ChargePoint, Task, Uav, Vehicle, Worker};

    fn cell(x: f64, y: f64) -> GridPoint {
        GridPoint::new(x + 0.5, y + 0.5)
    }

    fn snap(width: f64, height: f64) -> Snapshot {
        Snapshot {
            now: 0.0,
            interval: 10.0,
            limit_time: 60.0,
            area: Area { width, height },
            uavs: vec![],
            workers: vec![],
            vehicles: vec![],
            tasks: vec![],
            charges: vec![],
        }
    }

    fn uav(id: usize, x: f64, y: f64, power: f64) -> Uav {
        Uav { id, loc: cell(x, y), speed: 1.0, full_power: 30.0, power, uptime: 0.0, downtime: 60.0 }
    }

    fn worker(id: usize, x: f64, y: f64) -> Worker {
        Worker { id, loc: cell(x, y), speed: 0.5, uptime: 0.0, downtime: 60.0 }
    }

    fn vehicle(id: usize, x: f64, y: f64) -> Vehicle {
        Vehicle { id, loc: cell(x, y), speed: 1.0, charge_power: 10.0, uptime: 0.0, downtime: 60.0 }
    }

    fn task(id: usize, x: f64, y: f64) -> Task {
        Task { id, loc: cell(x, y), cost_power: 3.0, completed: false }
    }

    fn charge(id: usize, x: f64, y: f64) -> ChargePoint {
        ChargePoint { id, loc: cell(x, y) }
    }

    #[test]
    fn greedy_converging_agents_pair_on_the_task() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 0.0, 0.0, 30.0)];
        s.workers = vec![worker(0, 1.0, 0.0)];
        s.tasks = vec![task(0, 3.0, 0.0)];
        s.charges = vec![charge(0, 3.0, 1.0)];
        let sched = greedy_step(&s);
        assert_eq!(sched.actions, vec![Action::TaskPair { uav: 0, task: 0, worker: 0 }]);
    }

    #[test]
    fn greedy_without_tasks_emits_nothing() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 0.0, 0.0, 30.0)];
        s.workers = vec![worker(0, 1.0, 0.0)];
        assert!(greedy_step(&s).actions.is_empty());
    }

    #[test]
    fn greedy_breaks_score_ties_by_cell_index() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 1.0, 0.0, 30.0)];
        // two tasks straddle the uav; several cells tie on summed distance
        // and the scan keeps the lowest index
        s.tasks = vec![task(0, 0.0, 0.0), task(1, 2.0, 0.0)];
        s.charges = vec![charge(0, 1.0, 1.0)];
        let sched = greedy_step(&s);
        assert_eq!(
            sched.actions,
            vec![Action::MoveTo { kind: AgentKind::Uav, id: 0, dest: cell(0.0, 0.0) }]
        );
    }

    #[test]
    fn greedy_vehicles_chase_uav_destinations() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 0.0, 0.0, 30.0)];
        s.vehicles = vec![vehicle(0, 5.0, 3.0)];
        s.tasks = vec![task(0, 5.0, 0.0)];
        s.charges = vec![charge(0, 5.0, 1.0)];
        let sched = greedy_step(&s);
        assert!(sched
            .actions
            .contains(&Action::MoveTo { kind: AgentKind::Uav, id: 0, dest: cell(5.0, 0.0) }));
        assert!(sched
            .actions
            .contains(&Action::MoveTo { kind: AgentKind::Vehicle, id: 0, dest: cell(5.0, 0.0) }));
    }

    #[test]
    fn kwta_k1_pairs_nearest_feasible_triple() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 2.0, 2.0, 20.0)];
        s.workers = vec![worker(0, 2.0, 3.0), worker(1, 8.0, 8.0)];
        s.tasks = vec![task(0, 2.0, 3.0), task(1, 2.0, 6.0)];
        s.charges = vec![charge(0, 2.0, 2.0)];
        let sched = kwta_step(&s, &KwtaParams { k: 1, power_split: None });
        assert_eq!(sched.actions, vec![Action::TaskPair { uav: 0, task: 0, worker: 0 }]);
    }

    #[test]
    fn kwta_descends_past_its_shortlist_when_intersections_miss() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 0.0, 0.0, 30.0)];
        // under k=1 both workers retain only the far task while the uav
        // retains the near one; the uav walks down its score order and
        // matches on the far task with the closer of the two workers
        s.workers = vec![worker(0, 5.0, 5.0), worker(1, 8.0, 8.0)];
        s.tasks = vec![task(0, 0.0, 1.0), task(1, 7.0, 7.0)];
        s.charges = vec![charge(0, 1.0, 1.0)];
        let sched = kwta_step(&s, &KwtaParams { k: 1, power_split: None });
        assert_eq!(sched.actions, vec![Action::TaskPair { uav: 0, task: 1, worker: 1 }]);
    }

    #[test]
    fn kwta_leaves_uavs_unmatched_when_no_worker_retains_their_tasks() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 0.0, 0.0, 30.0)];
        // the only reachable task for the uav is out of every worker's
        // shortlist and the far task is beyond the uav's power, so no pair
        // forms and the uav is left to the simulator's default stay
        s.uavs[0].power = 6.0;
        s.workers = vec![worker(0, 8.0, 8.0)];
        s.tasks = vec![task(0, 0.0, 1.0), task(1, 8.0, 8.0)];
        s.charges = vec![charge(0, 0.0, 2.0)];
        let sched = kwta_step(&s, &KwtaParams { k: 1, power_split: None });
        assert!(sched.actions.is_empty());
    }

    #[test]
    fn kwta_drained_uav_books_a_charge() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 2.0, 2.0, 2.0)];
        s.workers = vec![worker(0, 2.0, 3.0)];
        s.tasks = vec![task(0, 8.0, 8.0)];
        s.charges = vec![charge(0, 3.0, 2.0)];
        s.vehicles = vec![vehicle(0, 3.0, 2.0)];
        for params in [
            KwtaParams { k: 5, power_split: None },
            KwtaParams { k: 5, power_split: Some(0.5) },
        ] {
            let sched = kwta_step(&s, &params);
            assert_eq!(
                sched.actions,
                vec![Action::ChargePair { uav: 0, charge: 0, vehicle: 0 }],
                "split rule {:?}",
                params.power_split
            );
        }
    }

    #[test]
    fn kwta_without_partners_emits_no_actions() {
        let mut s = snap(10.0, 10.0);
        s.uavs = vec![uav(0, 0.0, 0.0, 30.0)];
        s.tasks = vec![task(0, 4.0, 0.0)];
        s.charges = vec![charge(0, 4.0, 1.0)];
        let sched = kwta_step(&s, &KwtaParams::default());
        assert!(sched.actions.is_empty());
    }

    #[test]
    fn both_baselines_are_deterministic_and_conflict_free() {
        for seed in 0..4u64 {
            let sc = crate::scenario_gen::generate(&crate::scenario_gen::GenParams {
                width: 12,
                height: 12,
                tasks: 15,
                charges: 4,
                workers: 8,
                uavs: 6,
                vehicles: 4,
                online_minutes: 60.0,
                limit_time: 60.0,
                interval: 10.0,
                seed,
                ..Default::default()
            })
            .unwrap();
            let snap = crate::sim::SimState::new(sc).snapshot(0.0);
            for sched in [
                greedy_step(&snap),
                kwta_step(&snap, &KwtaParams::default()),
            ] {
                for (i, a) in sched.actions.iter().enumerate() {
                    for b in sched.actions.iter().skip(i + 1) {
                        assert!(!a.conflicts_with(b), "{a:?} vs {b:?}");
                    }
                }
            }
            assert_eq!(greedy_step(&snap).actions, greedy_step(&snap).actions);
            assert_eq!(
                kwta_step(&snap, &KwtaParams::default()).actions,
                kwta_step(&snap, &KwtaParams::default()).actions
            );
        }
    }
}
