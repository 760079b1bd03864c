// Shared helpers for the integration suites: an exact reference solver that
// shares no code with the solvers under test, and deterministic scenario
// builders sized for exhaustive checking.

#![allow(dead_code)]

use crowdsched::graph::{build_epoch_graph, MwisGraph, WeightedGraph};
use crowdsched::model::Scenario;
use crowdsched::scenario_gen::{generate, GenParams};
use crowdsched::sim::SimState;

/// Exact maximum-weight independent set by branch and bound over bitmask
/// adjacency. Only for graphs that fit in a single word.
pub fn exact_mwis_weight<G: MwisGraph>(g: &G) -> f64 {
    let n = g.node_count();
    assert!(n <= 64, "exact solver only handles tiny graphs, got {n} nodes");
    if n == 0 {
        return 0.0;
    }
    // Heaviest node first so strong solutions appear early and the
    // remaining-weight bound prunes hard.
    let weights: Vec<f64> = (0..n).map(|v| g.weight(v)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));
    let mut pos_of = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        pos_of[v] = p;
    }
    let w: Vec<f64> = order.iter().map(|&v| weights[v]).collect();
    let mut adj = vec![0u64; n];
    for (p, &v) in order.iter().enumerate() {
        let mut mask = 0u64;
        g.for_each_neighbor(v, |u| mask |= 1 << pos_of[u]);
        adj[p] = mask;
    }
    let all = if n == 64 { !0u64 } else { (1u64 << n) - 1 };
    let mut best = 0.0f64;
    branch(&w, &adj, all, 0.0, &mut best);
    best
}

fn branch(w: &[f64], adj: &[u64], open: u64, acc: f64, best: &mut f64) {
    if acc > *best {
        *best = acc;
    }
    if open == 0 {
        return;
    }
    let mut reachable = acc;
    let mut m = open;
    while m != 0 {
        let v = m.trailing_zeros() as usize;
        reachable += w[v];
        m &= m - 1;
    }
    if reachable <= *best {
        return;
    }
    // Lowest open position is the heaviest remaining node.
    let v = open.trailing_zeros() as usize;
    let bit = 1u64 << v;
    branch(w, adj, open & !bit & !adj[v], acc + w[v], best);
    branch(w, adj, open & !bit, acc, best);
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic draw from `lo..=hi`, spread by a splitmix step.
pub fn pick(seed: u64, salt: u64, lo: usize, hi: usize) -> usize {
    lo + (mix(seed, salt) as usize) % (hi - lo + 1)
}

/// Tiny always-on fleet whose opening epoch graph is small enough for the
/// exact solver. Draws that land above `max_nodes` return None; callers
/// advance the seed and redraw.
pub fn small_epoch_graph(seed: u64, max_nodes: usize) -> Option<WeightedGraph> {
    let side = pick(seed, 1, 6, 12);
    let params = GenParams {
        width: side,
        height: side,
        tasks: pick(seed, 2, 1, 3),
        charges: pick(seed, 3, 1, 2),
        workers: pick(seed, 4, 1, 3),
        uavs: pick(seed, 5, 1, 3),
        vehicles: pick(seed, 6, 1, 2),
        online_minutes: 30.0,
        limit_time: 30.0,
        seed,
        ..GenParams::default()
    };
    let sc = generate(&params).expect("small scenario generation");
    let g = first_epoch_graph(&sc);
    (g.node_count() >= 3 && g.node_count() <= max_nodes).then_some(g)
}

/// The conflict graph an episode would open with, from the fleet's starting
/// positions.
pub fn first_epoch_graph(sc: &Scenario) -> WeightedGraph {
    let snap = SimState::new(sc.clone()).snapshot(0.0);
    build_epoch_graph(&snap, sc.weight_mode)
}

/// Full-scale scenario from the stock generator settings, varying only the
/// layout seed and weighting.
pub fn stock_scenario(seed: u64, params: GenParams) -> Scenario {
    generate(&GenParams { seed, ..params }).expect("scenario generation")
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}
