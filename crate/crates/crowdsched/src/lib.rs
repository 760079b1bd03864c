//! Scheduling engine for heterogeneous mobile crowdsensing fleets.
//!
//! A fleet of UAVs, human workers, and mobile charging vehicles services
//! sensing tasks over a gridded disaster area. Time advances in fixed
//! decision intervals; at each epoch the idle agents, pending tasks, and
//! charging points are turned into a weighted conflict graph whose maximum
//! weight independent set is the epoch schedule. Several solvers are
//! provided: an iterated local search over the full graph, a much faster
//! priority-queue variant that grows a subgraph on demand, and two
//! single-pass baselines.

pub mod baselines;
pub mod graph;
pub mod ils;
pub mod model;
pub mod mpq;
pub mod scenario_gen;
pub mod sim;
pub mod weights;

#[cfg(test)]
pub mod testutil;
