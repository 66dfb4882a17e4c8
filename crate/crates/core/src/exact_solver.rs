//! Brute-force optimal maximal lateness for small instances.
//!
//! Depth-first search over schedule prefixes. A prefix already carries a
//! lateness value (the worst completion-plus-delivery among its own jobs),
//! and appending jobs can only keep or worsen it, so any prefix at or above
//! the incumbent is safe to prune.

use num_traits::Zero;
use thiserror::Error;

use crate::scheduling::SchedulingInstance;
use crate::time::Time;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance has {n} jobs, above the exact-solver limit {limit}")]
    InstanceTooLarge { n: usize, limit: usize },
}

/// Exact optimum with one witness order and the search-node count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimumResult {
    pub optimum: Time,
    pub witness: Vec<usize>,
    pub nodes_explored: u64,
}

/// Default cap on the instance size for [`optimum_lateness`].
pub const DEFAULT_LIMIT: usize = 10;

/// Finds the minimal maximal lateness over all processing orders.
///
/// The witness is deterministic: among optimal orders, the first one in the
/// lexicographic search with strict-improvement updates.
pub fn optimum_lateness(
    instance: &SchedulingInstance,
    limit: usize,
) -> Result<OptimumResult, SolverError> {
    let n = instance.n();
    if n > limit {
        return Err(SolverError::InstanceTooLarge { n, limit });
    }
    let mut search = Search {
        instance,
        used: vec![false; n],
        prefix: Vec::with_capacity(n),
        best: None,
        best_witness: Vec::new(),
        nodes: 0,
    };
    search.explore(Time::zero(), Time::zero());
    Ok(OptimumResult {
        optimum: search.best.expect("n >= 1 guarantees a complete schedule"),
        witness: search.best_witness,
        nodes_explored: search.nodes,
    })
}

struct Search<'a> {
    instance: &'a SchedulingInstance,
    used: Vec<bool>,
    prefix: Vec<usize>,
    best: Option<Time>,
    best_witness: Vec<usize>,
    nodes: u64,
}

impl Search<'_> {
    fn explore(&mut self, completion: Time, prefix_lateness: Time) {
        self.nodes += 1;
        if let Some(best) = self.best {
            if prefix_lateness >= best {
                return;
            }
        }
        if self.prefix.len() == self.instance.n() {
            self.best = Some(prefix_lateness);
            self.best_witness = self.prefix.clone();
            return;
        }
        for job_index in 0..self.instance.n() {
            if self.used[job_index] {
                continue;
            }
            let job = self.instance.job(job_index);
            let start = completion.max(job.release);
            let done = start + job.processing;
            let lateness = prefix_lateness.max(done + job.delivery);
            self.used[job_index] = true;
            self.prefix.push(job_index);
            self.explore(done, lateness);
            self.prefix.pop();
            self.used[job_index] = false;
        }
    }
}
