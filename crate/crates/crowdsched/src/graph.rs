//! Per-epoch weighted conflict graph over candidate actions.
//!
//! Nodes are candidate commitments (stay put, reposition, or a joint
//! task/charge assignment); an edge means two candidates cannot both be
//! committed because they share an agent or a task. Charging points are not
//! a conflict resource: they serve arrivals first come first served, so any
//! number of assignments may target the same point.
//!
//! Adjacency is implicit. Pair nodes alone number |uavs|*|tasks|*|workers|,
//! and with every node touching a handful of shared resources the edge set
//! is dense within per-resource cliques. We therefore never materialize
//! edges: each resource keeps a sorted list of the node ids referencing it,
//! and a node's neighborhood is the merged union of its resources' lists.

use crate::model::{charge_feasible, task_feasible, Scenario, WeightMode};
use crate::weights::{
    cost_tables, pair_charge_weight, pair_task_weight, softplus, uav_charge_gain, uav_task_gain,
    vehicle_move_gain, worker_move_gain, CostTables, Snapshot,
};

/// What committing a node makes the participants do. Indices are positions
/// in the snapshot's agent/task/charge vectors, not scenario ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    UavStay { uav: usize },
    WorkerStay { worker: usize },
    VehicleStay { vehicle: usize },
    UavToTask { uav: usize, task: usize },
    WorkerToTask { worker: usize, task: usize },
    UavToCharge { uav: usize, charge: usize },
    VehicleToCharge { vehicle: usize, charge: usize },
    TaskPair { uav: usize, task: usize, worker: usize },
    ChargePair { uav: usize, charge: usize, vehicle: usize },
}

impl NodeKind {
    pub fn uav(&self) -> Option<usize> {
        match *self {
            NodeKind::UavStay { uav }
            | NodeKind::UavToTask { uav, .. }
            | NodeKind::UavToCharge { uav, .. }
            | NodeKind::TaskPair { uav, .. }
            | NodeKind::ChargePair { uav, .. } => Some(uav),
            _ => None,
        }
    }

    pub fn worker(&self) -> Option<usize> {
        match *self {
            NodeKind::WorkerStay { worker }
            | NodeKind::WorkerToTask { worker, .. }
            | NodeKind::TaskPair { worker, .. } => Some(worker),
            _ => None,
        }
    }

    pub fn vehicle(&self) -> Option<usize> {
        match *self {
            NodeKind::VehicleStay { vehicle }
            | NodeKind::VehicleToCharge { vehicle, .. }
            | NodeKind::ChargePair { vehicle, .. } => Some(vehicle),
            _ => None,
        }
    }

    pub fn task(&self) -> Option<usize> {
        match *self {
            NodeKind::UavToTask { task, .. }
            | NodeKind::WorkerToTask { task, .. }
            | NodeKind::TaskPair { task, .. } => Some(task),
            _ => None,
        }
    }

    pub fn charge(&self) -> Option<usize> {
        match *self {
            NodeKind::UavToCharge { charge, .. }
            | NodeKind::VehicleToCharge { charge, .. }
            | NodeKind::ChargePair { charge, .. } => Some(charge),
            _ => None,
        }
    }

    /// Importance tier: completed tasks outrank charging appointments, which
    /// outrank everything that only repositions agents.
    pub fn level(&self) -> u8 {
        match self {
            NodeKind::TaskPair { .. } => 2,
            NodeKind::ChargePair { .. } => 1,
            _ => 0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::UavStay { .. } => "uav_stay",
            NodeKind::WorkerStay { .. } => "worker_stay",
            NodeKind::VehicleStay { .. } => "vehicle_stay",
            NodeKind::UavToTask { .. } => "uav_task",
            NodeKind::WorkerToTask { .. } => "worker_task",
            NodeKind::UavToCharge { .. } => "uav_charge",
            NodeKind::VehicleToCharge { .. } => "vehicle_charge",
            NodeKind::TaskPair { .. } => "uav_task_worker",
            NodeKind::ChargePair { .. } => "uav_charge_vehicle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub id: usize,
    pub kind: NodeKind,
    pub weight: f64,
}

/// True when the two candidates cannot coexist in one schedule: they share
/// an agent, or they consume the same task. Sharing only a charging point
/// is allowed.
pub fn has_conflict(a: &NodeKind, b: &NodeKind) -> bool {
    fn same(x: Option<usize>, y: Option<usize>) -> bool {
        matches!((x, y), (Some(p), Some(q)) if p == q)
    }
    same(a.uav(), b.uav())
        || same(a.worker(), b.worker())
        || same(a.vehicle(), b.vehicle())
        || same(a.task(), b.task())
}

/// Interface the solvers run against; implemented both by the implicit
/// epoch graph and by small explicit graphs (tests, extracted subgraphs).
/// Groups partition nodes by the agent whose queue owns them.
pub trait MwisGraph {
    fn node_count(&self) -> usize;
    fn weight(&self, n: usize) -> f64;
    fn level(&self, n: usize) -> u8;
    fn group_count(&self) -> usize;
    fn group_of(&self, n: usize) -> usize;
    /// Calls `f` once per neighbor, in ascending id order, never for `n`.
    fn for_each_neighbor<F: FnMut(usize)>(&self, n: usize, f: F);

    /// Every group this node's action involves, owning group included.
    /// Joint actions serve two or three agents; the default covers
    /// single-owner graphs.
    fn for_each_agent<F: FnMut(usize)>(&self, n: usize, mut f: F) {
        f(self.group_of(n));
    }

    fn is_independent(&self, members: &[usize]) -> bool {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                let mut hit = false;
                self.for_each_neighbor(a, |m| hit |= m == b);
                if hit {
                    return false;
                }
            }
        }
        true
    }

    fn weight_of(&self, members: &[usize]) -> f64 {
        members.iter().map(|&n| self.weight(n)).sum()
    }
}

/// The full epoch graph: nodes plus per-resource membership lists that stand
/// in for the edge set.
pub struct WeightedGraph {
    pub nodes: Vec<GraphNode>,
    by_uav: Vec<Vec<usize>>,
    by_worker: Vec<Vec<usize>>,
    by_vehicle: Vec<Vec<usize>>,
    by_task: Vec<Vec<usize>>,
}

impl WeightedGraph {
    fn empty(snap: &Snapshot) -> Self {
        WeightedGraph {
            nodes: Vec::new(),
            by_uav: vec![Vec::new(); snap.uavs.len()],
            by_worker: vec![Vec::new(); snap.workers.len()],
            by_vehicle: vec![Vec::new(); snap.vehicles.len()],
            by_task: vec![Vec::new(); snap.tasks.len()],
        }
    }

    fn push(&mut self, kind: NodeKind, weight: f64) {
        let id = self.nodes.len();
        // membership lists stay sorted because ids only grow
        if let Some(u) = kind.uav() {
            self.by_uav[u].push(id);
        }
        if let Some(w) = kind.worker() {
            self.by_worker[w].push(id);
        }
        if let Some(v) = kind.vehicle() {
            self.by_vehicle[v].push(id);
        }
        if let Some(t) = kind.task() {
            self.by_task[t].push(id);
        }
        self.nodes.push(GraphNode { id, kind, weight });
    }

    fn resource_lists(&self, n: usize) -> [Option<&[usize]>; 4] {
        let k = &self.nodes[n].kind;
        [
            k.uav().map(|u| self.by_uav[u].as_slice()),
            k.worker().map(|w| self.by_worker[w].as_slice()),
            k.vehicle().map(|v| self.by_vehicle[v].as_slice()),
            k.task().map(|t| self.by_task[t].as_slice()),
        ]
    }

    pub fn edge_count(&self) -> usize {
        let mut total = 0usize;
        for n in 0..self.nodes.len() {
            self.for_each_neighbor(n, |_| total += 1);
        }
        total / 2
    }

    /// Line-oriented debug form: `node <id> <kind> <weight>` then
    /// `edge <a> <b>` with a < b.
    pub fn to_debug_string(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for n in &self.nodes {
            writeln!(out, "node {} {} {}", n.id, n.kind.label(), n.weight).unwrap();
        }
        for n in 0..self.nodes.len() {
            self.for_each_neighbor(n, |m| {
                if n < m {
                    writeln!(out, "edge {} {}", n, m).unwrap();
                }
            });
        }
        out
    }
}

impl MwisGraph for WeightedGraph {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn weight(&self, n: usize) -> f64 {
        self.nodes[n].weight
    }

    fn level(&self, n: usize) -> u8 {
        self.nodes[n].kind.level()
    }

    fn group_count(&self) -> usize {
        self.by_uav.len() + self.by_worker.len() + self.by_vehicle.len()
    }

    /// Queue owner: the node's UAV when it has one, else its worker, else
    /// its vehicle. Every node names at least one agent.
    fn group_of(&self, n: usize) -> usize {
        let k = &self.nodes[n].kind;
        if let Some(u) = k.uav() {
            u
        } else if let Some(w) = k.worker() {
            self.by_uav.len() + w
        } else {
            self.by_uav.len() + self.by_worker.len() + k.vehicle().expect("node names no agent")
        }
    }

    fn for_each_agent<F: FnMut(usize)>(&self, n: usize, mut f: F) {
        let k = &self.nodes[n].kind;
        if let Some(u) = k.uav() {
            f(u);
        }
        if let Some(w) = k.worker() {
            f(self.by_uav.len() + w);
        }
        if let Some(v) = k.vehicle() {
            f(self.by_uav.len() + self.by_worker.len() + v);
        }
    }

    fn for_each_neighbor<F: FnMut(usize)>(&self, n: usize, mut f: F) {
        let lists = self.resource_lists(n);
        let mut pos = [0usize; 4];
        loop {
            let mut min = usize::MAX;
            for (i, list) in lists.iter().enumerate() {
                if let Some(l) = list {
                    if pos[i] < l.len() {
                        min = min.min(l[pos[i]]);
                    }
                }
            }
            if min == usize::MAX {
                return;
            }
            for (i, list) in lists.iter().enumerate() {
                if let Some(l) = list {
                    if pos[i] < l.len() && l[pos[i]] == min {
                        pos[i] += 1;
                    }
                }
            }
            if min != n {
                f(min);
            }
        }
    }
}

/// Builds the epoch graph. One stay-put node per schedulable agent; solo
/// repositioning nodes for every agent-target pair except zero-length moves
/// (the stay-put node already covers those); joint nodes wherever the power
/// constraints hold. Availability windows gate who appears in the snapshot,
/// not how long a committed action may run.
pub fn build_graph(snap: &Snapshot, tables: &CostTables, mode: WeightMode) -> WeightedGraph {
    let mut g = WeightedGraph::empty(snap);
    let stay = softplus(0.0);

    for (i, _) in snap.uavs.iter().enumerate() {
        g.push(NodeKind::UavStay { uav: i }, stay);
    }
    for (j, _) in snap.workers.iter().enumerate() {
        g.push(NodeKind::WorkerStay { worker: j }, stay);
    }
    for (k, _) in snap.vehicles.iter().enumerate() {
        g.push(NodeKind::VehicleStay { vehicle: k }, stay);
    }

    for (i, u) in snap.uavs.iter().enumerate() {
        for (x, t) in snap.tasks.iter().enumerate() {
            if !task_feasible(u, t, &snap.charges) || u.loc == t.loc {
                continue;
            }
            g.push(
                NodeKind::UavToTask { uav: i, task: x },
                uav_task_gain(u, t.loc, tables, snap),
            );
        }
    }
    for (j, w) in snap.workers.iter().enumerate() {
        for (x, t) in snap.tasks.iter().enumerate() {
            if w.loc == t.loc {
                continue;
            }
            g.push(
                NodeKind::WorkerToTask { worker: j, task: x },
                worker_move_gain(w, t.loc, tables, snap),
            );
        }
    }
    for (i, u) in snap.uavs.iter().enumerate() {
        for (y, c) in snap.charges.iter().enumerate() {
            if !charge_feasible(u, c) || u.loc == c.loc {
                continue;
            }
            g.push(
                NodeKind::UavToCharge { uav: i, charge: y },
                uav_charge_gain(u, c.loc, tables, snap),
            );
        }
    }
    for (k, v) in snap.vehicles.iter().enumerate() {
        for (y, c) in snap.charges.iter().enumerate() {
            if v.loc == c.loc {
                continue;
            }
            g.push(
                NodeKind::VehicleToCharge { vehicle: k, charge: y },
                vehicle_move_gain(v, c.loc, tables, snap),
            );
        }
    }

    for (i, u) in snap.uavs.iter().enumerate() {
        for (x, t) in snap.tasks.iter().enumerate() {
            if !task_feasible(u, t, &snap.charges) {
                continue;
            }
            for (j, w) in snap.workers.iter().enumerate() {
                g.push(
                    NodeKind::TaskPair { uav: i, task: x, worker: j },
                    pair_task_weight(u, t, w, tables, snap, mode),
                );
            }
        }
    }
    for (i, u) in snap.uavs.iter().enumerate() {
        for (y, c) in snap.charges.iter().enumerate() {
            if !charge_feasible(u, c) {
                continue;
            }
            for (k, v) in snap.vehicles.iter().enumerate() {
                g.push(
                    NodeKind::ChargePair { uav: i, charge: y, vehicle: k },
                    pair_charge_weight(u, c, v, tables, snap, mode),
                );
            }
        }
    }
    g
}

/// Convenience wrapper for callers that have not built tables themselves.
pub fn build_epoch_graph(snap: &Snapshot, mode: WeightMode) -> WeightedGraph {
    let tables = cost_tables(snap);
    build_graph(snap, &tables, mode)
}

/// Explicit-adjacency graph for solver-only callers: arbitrary test
/// instances and the subgraphs grown by the queue-based accelerator, both
/// far too small to need the implicit representation.
#[derive(Debug, Clone, Default)]
pub struct SolverGraph {
    weights: Vec<f64>,
    levels: Vec<u8>,
    groups: Vec<usize>,
    group_count: usize,
    adj: Vec<Vec<usize>>,
}

impl SolverGraph {
    pub fn new() -> Self {
        SolverGraph::default()
    }

    /// All nodes at level 0; edges added separately.
    pub fn with_weights(weights: &[f64]) -> Self {
        let mut g = SolverGraph::new();
        for &w in weights {
            g.add_node(w, 0);
        }
        g
    }

    /// Nodes default to one group each (every node its own queue owner).
    pub fn add_node(&mut self, weight: f64, level: u8) -> usize {
        let id = self.weights.len();
        self.weights.push(weight);
        self.levels.push(level);
        self.groups.push(id);
        self.group_count = self.group_count.max(id + 1);
        self.adj.push(Vec::new());
        id
    }

    pub fn set_group(&mut self, node: usize, group: usize) {
        self.groups[node] = group;
        self.group_count = self.group_count.max(group + 1);
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        assert!(a != b, "self-loop on node {a}");
        assert!(a < self.weights.len() && b < self.weights.len());
        if let Err(pos) = self.adj[a].binary_search(&b) {
            self.adj[a].insert(pos, b);
            let pos = self.adj[b].binary_search(&a).unwrap_err();
            self.adj[b].insert(pos, a);
        }
    }

    pub fn neighbors(&self, n: usize) -> &[usize] {
        &self.adj[n]
    }
}

impl MwisGraph for SolverGraph {
    fn node_count(&self) -> usize {
        self.weights.len()
    }

    fn weight(&self, n: usize) -> f64 {
        self.weights[n]
    }

    fn level(&self, n: usize) -> u8 {
        self.levels[n]
    }

    fn group_count(&self) -> usize {
        self.group_count
    }

    fn group_of(&self, n: usize) -> usize {
        self.groups[n]
    }

    fn for_each_neighbor<F: FnMut(usize)>(&self, n: usize, mut f: F) {
        for &m in &self.adj[n] {
            f(m);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KindBounds {
    pub uav_stay: usize,
    pub worker_stay: usize,
    pub vehicle_stay: usize,
    pub uav_task: usize,
    pub worker_task: usize,
    pub uav_charge: usize,
    pub vehicle_charge: usize,
    pub task_pair: usize,
    pub charge_pair: usize,
}

impl KindBounds {
    pub fn total(&self) -> usize {
        self.uav_stay
            + self.worker_stay
            + self.vehicle_stay
            + self.uav_task
            + self.worker_task
            + self.uav_charge
            + self.vehicle_charge
            + self.task_pair
            + self.charge_pair
    }
}

/// Upper bounds on per-kind node counts if every agent were schedulable and
/// every combination feasible. Pair counts grow as a cubic product, which is
/// what motivates the implicit adjacency above.
pub fn worst_case_counts(sc: &Scenario) -> KindBounds {
    let (u, w, v) = (sc.uavs.len(), sc.workers.len(), sc.vehicles.len());
    let (t, c) = (sc.tasks.len(), sc.charges.len());
    KindBounds {
        uav_stay: u,
        worker_stay: w,
        vehicle_stay: v,
        uav_task: u * t,
        worker_task: w * t,
        uav_charge: u * c,
        vehicle_charge: v * c,
        task_pair: u * t * w,
        charge_pair: u * c * v,
    }
}
