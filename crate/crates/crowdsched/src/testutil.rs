//! Shared fixtures for unit tests: compact snapshots, random solver graphs,
//! and an exhaustive reference solver to compare against.

use crate::graph::{MwisGraph, SolverGraph};
use crate::model::{Area, ChargePoint, GridPoint, Task, Uav, Vehicle, Worker};
use crate::weights::Snapshot;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Snapshot with everything on distinct integer positions of a 6-wide strip,
/// fresh batteries, and full-horizon availability windows: every combination
/// is feasible and no zero-length move exists.
pub fn small_snapshot(
    n_uav: usize,
    n_worker: usize,
    n_vehicle: usize,
    n_task: usize,
    n_charge: usize,
) -> Snapshot {
    let mut snap = Snapshot {
        now: 0.0,
        interval: 10.0,
        limit_time: 180.0,
        area: Area { width: 6.0, height: 7.0 },
        uavs: vec![],
        workers: vec![],
        vehicles: vec![],
        tasks: vec![],
        charges: vec![],
    };
    let mut spot = (0..).map(|i| GridPoint::new((i % 6) as f64, (i / 6) as f64));
    for id in 0..n_uav {
        snap.uavs.push(Uav {
            id,
            loc: spot.next().unwrap(),
            speed: 1.0,
            full_power: 30.0,
            power: 30.0,
            uptime: 0.0,
            downtime: 180.0,
        });
    }
    for id in 0..n_worker {
        snap.workers.push(Worker {
            id,
            loc: spot.next().unwrap(),
            speed: 0.5,
            uptime: 0.0,
            downtime: 180.0,
        });
    }
    for id in 0..n_vehicle {
        snap.vehicles.push(Vehicle {
            id,
            loc: spot.next().unwrap(),
            speed: 1.0,
            charge_power: 10.0,
            uptime: 0.0,
            downtime: 180.0,
        });
    }
    for id in 0..n_task {
        snap.tasks.push(Task { id, loc: spot.next().unwrap(), cost_power: 3.0, completed: false });
    }
    for id in 0..n_charge {
        snap.charges.push(ChargePoint { id, loc: spot.next().unwrap() });
    }
    snap
}

/// Random small scheduling scene: agent/task/charge counts drawn from shapes
/// whose epoch graphs stay within the oracle's node budget, geometry and
/// battery state scattered uniformly. This is the distribution the solver
/// quality suites run on.
pub fn random_small_snapshot(rng: &mut ChaCha8Rng) -> Snapshot {
    const SHAPES: &[(usize, usize, usize, usize, usize)] = &[
        (1, 1, 1, 1, 1),
        (1, 2, 1, 2, 1),
        (1, 1, 1, 3, 1),
        (1, 1, 2, 2, 1),
        (1, 2, 1, 1, 2),
        (1, 1, 1, 2, 2),
        (1, 2, 2, 1, 1),
    ];
    let (nu, nw, nv, nt, nc) = SHAPES[rng.gen_range(0..SHAPES.len())];
    let mut snap = small_snapshot(nu, nw, nv, nt, nc);
    let mut scatter = |loc: &mut GridPoint, rng: &mut ChaCha8Rng| {
        loc.x = rng.gen_range(0..6) as f64;
        loc.y = rng.gen_range(0..7) as f64;
    };
    for u in &mut snap.uavs {
        scatter(&mut u.loc, rng);
        u.power = u.full_power * rng.gen_range(0.2..1.0);
    }
    for w in &mut snap.workers {
        scatter(&mut w.loc, rng);
    }
    for v in &mut snap.vehicles {
        scatter(&mut v.loc, rng);
    }
    for t in &mut snap.tasks {
        scatter(&mut t.loc, rng);
        t.cost_power = rng.gen_range(1.0..5.0);
    }
    for c in &mut snap.charges {
        scatter(&mut c.loc, rng);
    }
    snap
}

/// Random graph whose weights cluster by level the way epoch graphs do:
/// joint task nodes an order of magnitude above joint charge nodes, which
/// sit above plain movement nodes.
pub fn random_solver_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> SolverGraph {
    let n = rng.gen_range(1..=max_nodes);
    let mut g = SolverGraph::new();
    for _ in 0..n {
        let level = rng.gen_range(0..3u8);
        let w = match level {
            2 => rng.gen_range(5.0..15.0),
            1 => rng.gen_range(1.5..4.0),
            _ => rng.gen_range(0.2..1.5),
        };
        g.add_node(w, level);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen_bool(0.3) {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Exhaustive maximum-weight independent set weight, by enumerating all
/// subsets. Only viable up to ~20 nodes.
pub fn oracle_weight<G: MwisGraph>(g: &G) -> f64 {
    let n = g.node_count();
    assert!(n <= 20, "oracle is exponential; got {n} nodes");
    let mut adj = vec![0u32; n];
    for i in 0..n {
        g.for_each_neighbor(i, |j| adj[i] |= 1 << j);
    }
    let mut best = 0.0f64;
    for mask in 0u32..(1u32 << n) {
        let mut ok = true;
        let mut w = 0.0;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if adj[i] & mask != 0 {
                ok = false;
                break;
            }
            w += g.weight(i);
        }
        if ok && w > best {
            best = w;
        }
    }
    best
}
