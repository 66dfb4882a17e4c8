//! Level-guided hybrid evolutionary search for the single-machine scheduling
//! problem with release and delivery times, together with the bound
//! calculators needed to compare measured behaviour against theory:
//! schema-survival probabilities with Chernoff tails, variable-drift runtime
//! bounds with an exact hitting-time oracle, and a brute-force optimum solver.
//!
//! The crate is organised around six modules:
//!
//! * [`engine`] — a generic population-based EA loop with level-indexed
//!   operator families and hybrid-elitist selection,
//! * [`schema_bounds`] — schema-survival probability calculators and exact
//!   count-distribution oracles,
//! * [`drift_bounds`] — per-level drift tables, runtime bound reports, and an
//!   exact expected-hitting-time solver for small Markov chains,
//! * [`scheduling`] — the scheduling instantiation: maximal lateness,
//!   long-job partitions, partial Jackson levels, and the suffix/swap
//!   operator families,
//! * [`exact_solver`] — brute-force optimal lateness for small instances,
//! * [`harness`] — seeded instance generation, experiment orchestration, and
//!   reproducible report files (driven by the `schedrift` CLI).

pub mod drift_bounds;
pub mod engine;
pub mod exact_solver;
pub mod harness;
pub mod schema_bounds;
pub mod scheduling;
pub mod time;

pub use drift_bounds::{ChainSpec, DriftLevelTable, RuntimeBoundReport};
pub use engine::{
    Individual, PairSampling, Population, Problem, RunTrace, SelectionRule, StopRule,
    StrategyProfile,
};
pub use exact_solver::OptimumResult;
pub use harness::{ExperimentConfig, ExperimentReport};
pub use schema_bounds::{CountDistribution, SchemaBoundInput, SchemaPredicate};
pub use scheduling::{
    EpsilonPartition, Job, RepositioningMap, Schedule, SchedulingInstance, SchedulingProblem,
};
pub use time::Time;
