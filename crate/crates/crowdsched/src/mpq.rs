//! Queue-accelerated solver: instead of searching the full epoch graph, pull
//! each agent's most promising candidates into a small subgraph, solve that,
//! and widen the pull whenever a round stops paying off.
//!
//! Every node sits in exactly one agent queue (its UAV's when it has one,
//! else its worker's, else its vehicle's), ordered by weight. Rounds extract
//! the top K per queue into a growing subgraph, re-solve warm-started from
//! the standing solution, adopt strictly better results, and double K
//! otherwise. The loop ends once every agent either appears in the solution
//! or has nothing left queued.

use crate::graph::{MwisGraph, SolverGraph};
use crate::ils::{solve_ils, ByValue, IlsParams, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

pub struct AgentQueues {
    queues: Vec<BinaryHeap<(ByValue, Reverse<usize>)>>,
}

impl AgentQueues {
    pub fn queue_count(&self) -> usize {
        self.queues.len()
    }

    pub fn queue_len(&self, agent: usize) -> usize {
        self.queues[agent].len()
    }

    pub fn total_queued(&self) -> usize {
        self.queues.iter().map(|q| q.len()).sum()
    }

    pub fn is_drained(&self, agent: usize) -> bool {
        self.queues[agent].is_empty()
    }

    /// Pops up to `k` heaviest entries from every queue, in agent order.
    pub fn extract_top_k(&mut self, k: usize) -> Vec<usize> {
        assert!(k >= 1);
        let mut out = Vec::new();
        for q in &mut self.queues {
            for _ in 0..k {
                match q.pop() {
                    Some((_, Reverse(n))) => out.push(n),
                    None => break,
                }
            }
        }
        out
    }
}

/// One queue per agent, holding every node that agent owns.
pub fn build_queues<G: MwisGraph>(g: &G) -> AgentQueues {
    let mut queues: Vec<BinaryHeap<(ByValue, Reverse<usize>)>> =
        (0..g.group_count()).map(|_| BinaryHeap::new()).collect();
    for n in 0..g.node_count() {
        queues[g.group_of(n)].push((ByValue(g.weight(n)), Reverse(n)));
    }
    AgentQueues { queues }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    pub k: usize,
    pub subgraph_nodes: usize,
    pub best_weight: f64,
    pub improved: bool,
}

pub fn trace_lines(trace: &[RoundTrace]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for t in trace {
        writeln!(
            out,
            "round {} k {} subgraph_nodes {} best_weight {} improved {}",
            t.round, t.k, t.subgraph_nodes, t.best_weight, t.improved
        )
        .unwrap();
    }
    out
}

pub fn solve_mpq<G: MwisGraph>(g: &G, ils: &IlsParams, seed: u64) -> Solution {
    solve_mpq_traced(g, ils, seed).0
}

pub fn solve_mpq_traced<G: MwisGraph>(g: &G, ils: &IlsParams, seed: u64) -> (Solution, Vec<RoundTrace>) {
    let mut seed_stream = ChaCha8Rng::seed_from_u64(seed);
    let mut queues = build_queues(g);

    let mut sub = SolverGraph::new();
    let mut sub_to_full: Vec<usize> = Vec::new();
    let mut full_to_sub: Vec<Option<usize>> = vec![None; g.node_count()];

    // standing solution, in subgraph ids
    let mut current = Solution::empty();
    let mut k = 1usize;
    let mut trace = Vec::new();
    let mut round = 0usize;

    loop {
        // done when each agent is in the solution or out of candidates
        let mut covered = vec![false; g.group_count()];
        for &m in &current.members {
            g.for_each_agent(sub_to_full[m], |a| covered[a] = true);
        }
        if covered
            .iter()
            .enumerate()
            .all(|(agent, &c)| c || queues.is_drained(agent))
        {
            break;
        }

        round += 1;
        let batch = queues.extract_top_k(k);
        for &n in &batch {
            let sid = sub.add_node(g.weight(n), g.level(n));
            sub.set_group(sid, g.group_of(n));
            sub_to_full.push(n);
            full_to_sub[n] = Some(sid);
        }
        // wire each newcomer to every already-extracted conflict partner
        for &n in &batch {
            let sid = full_to_sub[n].unwrap();
            g.for_each_neighbor(n, |m| {
                if let Some(sm) = full_to_sub[m] {
                    sub.add_edge(sid, sm);
                }
            });
        }

        let round_params = IlsParams { seed: seed_stream.gen(), ..ils.clone() };
        let candidate = solve_ils(&sub, &round_params, Some(&current));
        let improved = candidate.total_weight > current.total_weight;
        if improved {
            current = candidate;
        } else {
            k *= 2;
        }
        trace.push(RoundTrace {
            round,
            k,
            subgraph_nodes: sub.node_count(),
            best_weight: current.total_weight,
            improved,
        });
    }

    let mut members: Vec<usize> = current.members.iter().map(|&m| sub_to_full[m]).collect();
    members.sort_unstable();
    debug_assert!(g.is_independent(&members));
    (Solution { members, total_weight: current.total_weight }, trace)
}
