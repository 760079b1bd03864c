//! Iterated local search for maximum-weight independent sets.
//!
//! The search keeps an exact incremental view of every node's improvement
//! value sigma(n) = w(n) - sum of solution-neighbor weights, so testing and
//! executing a move never rescans the graph. Local search drains a lazy
//! max-sigma queue and falls back to one-for-two exchanges when the queue
//! empties. One full pass runs greedy construction, then alternates
//! stratified perturbation with that search, keeping the best solution seen
//! and accepting mild regressions so the walk can leave local optima.

use crate::graph::MwisGraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// ascending node ids
    pub members: Vec<usize>,
    pub total_weight: f64,
}

impl Solution {
    pub fn empty() -> Self {
        Solution { members: Vec::new(), total_weight: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct IlsParams {
    pub max_iter: usize,
    pub accept_threshold_init: f64,
    pub threshold_decay: f64,
    /// fraction of max_iter after which stagnation starts decaying the
    /// acceptance threshold
    pub stagnation_fraction: f64,
    pub seed: u64,
}

impl Default for IlsParams {
    fn default() -> Self {
        IlsParams {
            max_iter: 1000,
            accept_threshold_init: 0.95,
            threshold_decay: 0.99,
            stagnation_fraction: 0.25,
            seed: 0,
        }
    }
}

impl IlsParams {
    /// Short budget for solves embedded in an outer loop that warm-starts
    /// each call from the previous answer.
    pub fn embedded(seed: u64) -> Self {
        IlsParams { max_iter: 100, seed, ..IlsParams::default() }
    }
}

/// Improvement value of adding `n`: its own weight minus the weight it
/// would evict. `n` must not already be in the solution.
pub fn sigma<G: MwisGraph>(g: &G, n: usize, members: &[usize]) -> f64 {
    assert!(!members.contains(&n), "sigma is undefined for solution members");
    let mut loss = 0.0;
    g.for_each_neighbor(n, |m| {
        if members.contains(&m) {
            loss += g.weight(m);
        }
    });
    g.weight(n) - loss
}

/// Incremental solution state: membership, cached sigma for every node, and
/// the count of solution neighbors (zero conflicts = safe to insert).
#[derive(Clone)]
struct SearchState {
    members: Vec<usize>,
    in_set: Vec<bool>,
    sigma: Vec<f64>,
    conflicts: Vec<u32>,
    weight: f64,
}

impl SearchState {
    fn new<G: MwisGraph>(g: &G) -> Self {
        let n = g.node_count();
        SearchState {
            members: Vec::new(),
            in_set: vec![false; n],
            sigma: (0..n).map(|i| g.weight(i)).collect(),
            conflicts: vec![0; n],
            weight: 0.0,
        }
    }

    fn from_members<G: MwisGraph>(g: &G, members: &[usize]) -> Self {
        let mut s = SearchState::new(g);
        for &n in members {
            s.insert(g, n);
        }
        s
    }

    fn insert<G: MwisGraph>(&mut self, g: &G, n: usize) {
        debug_assert!(!self.in_set[n] && self.conflicts[n] == 0);
        self.in_set[n] = true;
        self.members.push(n);
        self.weight += g.weight(n);
        let w = g.weight(n);
        g.for_each_neighbor(n, |m| {
            self.sigma[m] -= w;
            self.conflicts[m] += 1;
        });
    }

    fn remove<G: MwisGraph>(&mut self, g: &G, n: usize) {
        debug_assert!(self.in_set[n]);
        self.in_set[n] = false;
        let pos = self.members.iter().position(|&m| m == n).unwrap();
        self.members.swap_remove(pos);
        self.weight -= g.weight(n);
        let w = g.weight(n);
        g.for_each_neighbor(n, |m| {
            self.sigma[m] += w;
            self.conflicts[m] -= 1;
        });
    }

    fn solution(&self) -> Solution {
        let mut members = self.members.clone();
        members.sort_unstable();
        Solution { members, total_weight: self.weight }
    }
}

/// Max-heap key over floats; paired with `Reverse<usize>` ids so ties break
/// toward the lowest id.
#[derive(PartialEq)]
pub(crate) struct ByValue(pub(crate) f64);

impl Eq for ByValue {}

impl PartialOrd for ByValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Greedy construction: take nodes in descending weight (level, then id,
/// breaking ties) whenever they fit.
pub fn initial_solution<G: MwisGraph>(g: &G) -> Solution {
    build_initial(g).solution()
}

fn build_initial<G: MwisGraph>(g: &G) -> SearchState {
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.sort_unstable_by(|&a, &b| {
        g.weight(b)
            .total_cmp(&g.weight(a))
            .then(g.level(b).cmp(&g.level(a)))
            .then(a.cmp(&b))
    });
    let mut state = SearchState::new(g);
    for n in order {
        if state.conflicts[n] == 0 {
            state.insert(g, n);
        }
    }
    state
}

/// Gains below this are treated as zero. The cached sigma values are kept by
/// incremental deltas, so equal-weight nodes can drift a few ulps apart and
/// fake an endless chain of "improving" swaps; demanding a real margin (and
/// re-deriving the gain from scratch before each move) bounds every move's
/// true weight gain away from zero, which is what makes the search terminate.
const MOVE_EPS: f64 = 1e-12;

/// Sigma moves to exhaustion, then one-for-two exchanges whenever the queue
/// runs dry. Heap entries are lazy; a popped entry whose key no longer
/// matches the live sigma is discarded (and re-pushed while still promising)
/// so the true maximum always surfaces first. Every executed move raises the
/// solution weight by more than MOVE_EPS, so the loop terminates.
fn local_search_from<G: MwisGraph>(
    g: &G,
    state: &mut SearchState,
    seeds: impl IntoIterator<Item = usize>,
) {
    let mut heap: BinaryHeap<(ByValue, Reverse<usize>)> = BinaryHeap::new();
    for n in seeds {
        if !state.in_set[n] && state.sigma[n] > MOVE_EPS {
            heap.push((ByValue(state.sigma[n]), Reverse(n)));
        }
    }
    let mut evicted: Vec<usize> = Vec::new();
    let mut mark = vec![false; g.node_count()];
    loop {
        while let Some((ByValue(key), Reverse(n))) = heap.pop() {
            if state.in_set[n] {
                continue;
            }
            if key.to_bits() != state.sigma[n].to_bits() {
                if state.sigma[n] > MOVE_EPS {
                    heap.push((ByValue(state.sigma[n]), Reverse(n)));
                }
                continue;
            }
            if !(state.sigma[n] > MOVE_EPS) {
                continue;
            }
            // certify against cache drift before touching the solution
            let mut exact = g.weight(n);
            g.for_each_neighbor(n, |m| {
                if state.in_set[m] {
                    exact -= g.weight(m);
                }
            });
            if !(exact > MOVE_EPS) {
                continue;
            }
            evicted.clear();
            g.for_each_neighbor(n, |m| {
                if state.in_set[m] {
                    evicted.push(m);
                }
            });
            for &m in &evicted {
                state.remove(g, m);
                // eviction raises neighbors' sigma; surface any new candidates
                g.for_each_neighbor(m, |p| {
                    if !state.in_set[p] && state.sigma[p] > MOVE_EPS {
                        heap.push((ByValue(state.sigma[p]), Reverse(p)));
                    }
                });
            }
            state.insert(g, n);
        }
        if !exchange_one_for_two(g, state, &mut heap, &mut mark) {
            break;
        }
    }
}

/// One exchange: drop a member for two of the nodes it alone blocks when
/// their combined weight beats it. Single-insertion moves cannot reach these
/// solutions (each node alone rates below the member it displaces), so
/// without the exchange the search stalls on, say, the (2,3,2) path holding
/// its middle node. Scans blockers in ascending id, candidate pairs
/// heaviest-first, and applies the first improving pair found; freed
/// neighbors of the dropped member re-enter the sigma queue.
fn exchange_one_for_two<G: MwisGraph>(
    g: &G,
    state: &mut SearchState,
    heap: &mut BinaryHeap<(ByValue, Reverse<usize>)>,
    mark: &mut [bool],
) -> bool {
    // outside nodes blocked by exactly one member, keyed by that member
    let mut cands: Vec<(usize, usize)> = Vec::new();
    for v in 0..g.node_count() {
        if !state.in_set[v] && state.conflicts[v] == 1 {
            let mut blocker = usize::MAX;
            g.for_each_neighbor(v, |m| {
                if state.in_set[m] {
                    blocker = m;
                }
            });
            cands.push((blocker, v));
        }
    }
    cands.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0)
            .then(g.weight(b.1).total_cmp(&g.weight(a.1)))
            .then(a.1.cmp(&b.1))
    });

    let mut i = 0;
    while i < cands.len() {
        let x = cands[i].0;
        let mut j = i;
        while j < cands.len() && cands[j].0 == x {
            j += 1;
        }
        let group = &cands[i..j];
        let wx = g.weight(x);
        for (a, &(_, v)) in group.iter().enumerate() {
            // weights descend within the group: once even the heaviest
            // remaining partner cannot lift the pair above x, stop
            if a + 1 >= group.len() || g.weight(v) + g.weight(group[a + 1].1) <= wx + MOVE_EPS {
                break;
            }
            g.for_each_neighbor(v, |m| mark[m] = true);
            let mut partner = None;
            for &(_, u) in &group[a + 1..] {
                if g.weight(v) + g.weight(u) <= wx + MOVE_EPS {
                    break;
                }
                if !mark[u] {
                    partner = Some(u);
                    break;
                }
            }
            g.for_each_neighbor(v, |m| mark[m] = false);
            if let Some(u) = partner {
                state.remove(g, x);
                state.insert(g, v);
                state.insert(g, u);
                g.for_each_neighbor(x, |p| {
                    if !state.in_set[p] && state.sigma[p] > 0.0 {
                        heap.push((ByValue(state.sigma[p]), Reverse(p)));
                    }
                });
                return true;
            }
        }
        i = j;
    }
    false
}

/// Runs sigma-driven search to a fixpoint from an arbitrary independent set.
pub fn local_search<G: MwisGraph>(g: &G, start: &Solution) -> Solution {
    let mut state = SearchState::from_members(g, &start.members);
    local_search_from(g, &mut state, 0..g.node_count());
    state.solution()
}

/// Perturbation strength: grows with sustained failure to improve, capped
/// relative to the solution size.
pub fn adapt_strength(solution_size: usize, no_improve: usize) -> usize {
    let k = 1 + no_improve / 10;
    k.min(2.max(solution_size.div_ceil(4)))
}

/// Candidate replaces current when strictly better, or when within the
/// acceptance threshold of it.
pub fn accept(current_weight: f64, candidate_weight: f64, threshold: f64) -> bool {
    candidate_weight > current_weight || candidate_weight >= threshold * current_weight
}

fn tier_of(iter: usize) -> u8 {
    (iter % 3) as u8
}

/// Removes a random sample from one weight tier (cycling per iteration) and
/// refills greedily from the removed nodes' different-level neighbors,
/// building a structural barrier against the search undoing the kick.
fn perturb_state<G: MwisGraph>(
    g: &G,
    state: &mut SearchState,
    strength: usize,
    iter: usize,
    rng: &mut ChaCha8Rng,
) {
    let tier = tier_of(iter);
    let mut tier_members: Vec<usize> = state.members.iter().copied().filter(|&n| g.level(n) == tier).collect();
    tier_members.sort_unstable();
    if tier_members.is_empty() {
        return;
    }
    let take = if tier == 2 {
        (strength / 2).max(1).min(tier_members.len())
    } else {
        strength.min(tier_members.len())
    };
    let removed: Vec<usize> = rand::seq::index::sample(rng, tier_members.len(), take)
        .iter()
        .map(|i| tier_members[i])
        .collect();

    let mut refill: Vec<usize> = Vec::new();
    for &r in &removed {
        g.for_each_neighbor(r, |m| {
            if g.level(m) != tier && !state.in_set[m] {
                refill.push(m);
            }
        });
    }
    for &r in &removed {
        state.remove(g, r);
    }
    refill.sort_unstable();
    refill.dedup();
    use rand::seq::SliceRandom;
    refill.shuffle(rng);
    for &m in &refill {
        if !state.in_set[m] && state.conflicts[m] == 0 {
            state.insert(g, m);
        }
    }
}

/// One perturbation round on an explicit solution (the in-loop form reuses
/// the incremental state instead).
pub fn perturb<G: MwisGraph>(
    g: &G,
    start: &Solution,
    strength: usize,
    iter: usize,
    rng: &mut ChaCha8Rng,
) -> Solution {
    let mut state = SearchState::from_members(g, &start.members);
    perturb_state(g, &mut state, strength, iter, rng);
    state.solution()
}

/// Full solve: greedy start (or the provided warm start), local search, then
/// the perturb/search/accept loop. Returns the best solution encountered.
pub fn solve_ils<G: MwisGraph>(g: &G, params: &IlsParams, warm_start: Option<&Solution>) -> Solution {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut state = match warm_start {
        Some(s) => SearchState::from_members(g, &s.members),
        None => build_initial(g),
    };
    local_search_from(g, &mut state, 0..g.node_count());
    let mut best = state.solution();
    let mut threshold = params.accept_threshold_init;
    let mut no_improve = 0usize;
    let stagnation_limit = (params.max_iter as f64 * params.stagnation_fraction).floor();

    for iter in 1..=params.max_iter {
        let mut candidate = state.clone();
        let strength = adapt_strength(state.members.len(), no_improve);
        perturb_state(g, &mut candidate, strength, iter, &mut rng);
        // every node is a candidate each round; the lazy heap discards the
        // non-improving bulk on pop
        local_search_from(g, &mut candidate, 0..g.node_count());
        if accept(state.weight, candidate.weight, threshold) {
            state = candidate;
            if state.weight > best.total_weight {
                best = state.solution();
            }
        } else {
            no_improve += 1;
        }
        if no_improve as f64 > stagnation_limit {
            threshold *= params.threshold_decay;
        }
    }
    best
}
