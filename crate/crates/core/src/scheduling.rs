//! Single-machine scheduling with release and delivery times.
//!
//! An instance is a list of jobs `(r, p, q)`; a candidate solution is a
//! permutation giving the processing order. The objective is the maximal
//! lateness: the latest time any job finishes delivery. On top of the plain
//! objective this module builds the level structure that guides the EA:
//!
//! * jobs with processing time at least `eps * total_processing` are "long";
//!   an injective repositioning map assigns each long job a fixed position,
//! * a schedule's prefix level counts how many leading positions follow the
//!   partial Jackson rule (long jobs exactly at their assigned positions,
//!   every other position holding an available short job with the longest
//!   delivery time),
//! * the auxiliary fitness of a schedule is its best prefix level over all
//!   repositioning maps, computed by a single left-to-right scan,
//! * the operator families: suffix recombination keeps a prefix of the first
//!   parent and reorders the remaining jobs, and swap mutation exchanges two
//!   positions when a long job is involved and then rebuilds the affected
//!   prefix range by the Jackson rule.
//!
//! All time arithmetic is exact (rationals); the Jackson rule compares
//! delivery times for equality and would be meaningless under rounding.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::drift_bounds::DriftLevelTable;
use crate::engine::{
    IndexDistribution, MutationOps, PairSampling, Problem, RecombinationOps, SelectionRule,
    StrategyProfile,
};
use crate::schema_bounds::SchemaPredicate;
use crate::time::{format_time, parse_time, Time};

#[derive(Debug, Error)]
pub enum SchedulingError {
    #[error("instance must contain at least one job")]
    EmptyInstance,
    #[error("job {index} has a negative field")]
    NegativeJobField { index: usize },
    #[error("sequence is not a permutation of 0..{n}")]
    NotAPermutation { n: usize },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(String),
    #[error("position {position} out of range for {n} jobs")]
    PositionOutOfRange { position: usize, n: usize },
    #[error("level {level} out of range for {n} jobs")]
    LevelOutOfRange { level: usize, n: usize },
    #[error("suffix reordering has length {got}, expected {expected}")]
    SuffixLengthMismatch { got: usize, expected: usize },
    #[error("repositioning map must be an injective map from the long-job set into positions")]
    InvalidRepositioningMap,
    #[error("instance parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Solver(#[from] crate::exact_solver::SolverError),
}

/// One job: release, processing, and delivery time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub release: Time,
    pub processing: Time,
    pub delivery: Time,
}

/// An immutable scheduling instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulingInstance {
    jobs: Vec<Job>,
}

impl SchedulingInstance {
    pub fn new(jobs: Vec<Job>) -> Result<Self, SchedulingError> {
        if jobs.is_empty() {
            return Err(SchedulingError::EmptyInstance);
        }
        for (index, job) in jobs.iter().enumerate() {
            if job.release < Time::zero()
                || job.processing < Time::zero()
                || job.delivery < Time::zero()
            {
                return Err(SchedulingError::NegativeJobField { index });
            }
        }
        Ok(SchedulingInstance { jobs })
    }

    /// Convenience constructor from integer `(r, p, q)` triples.
    pub fn from_integers(triples: &[(i64, i64, i64)]) -> Result<Self, SchedulingError> {
        Self::new(
            triples
                .iter()
                .map(|&(r, p, q)| Job {
                    release: Time::from_integer(r),
                    processing: Time::from_integer(p),
                    delivery: Time::from_integer(q),
                })
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, index: usize) -> &Job {
        &self.jobs[index]
    }

    /// Sum of all processing times.
    pub fn total_processing(&self) -> Time {
        self.jobs
            .iter()
            .fold(Time::zero(), |acc, job| acc + job.processing)
    }

    /// Parses the instance file format: a line with `n`, then `n` lines of
    /// `r p q` as decimal rationals.
    pub fn parse(text: &str) -> Result<Self, SchedulingError> {
        let mut lines = text.lines().enumerate();
        let (line_no, header) =
            lines
                .by_ref()
                .find(|(_, l)| !l.trim().is_empty())
                .ok_or(SchedulingError::Parse {
                    line: 1,
                    message: "missing job count".into(),
                })?;
        let n: usize = header.trim().parse().map_err(|_| SchedulingError::Parse {
            line: line_no + 1,
            message: format!("invalid job count {:?}", header.trim()),
        })?;
        let mut jobs = Vec::with_capacity(n);
        for _ in 0..n {
            let (line_no, line) =
                lines
                    .by_ref()
                    .find(|(_, l)| !l.trim().is_empty())
                    .ok_or(SchedulingError::Parse {
                        line: 0,
                        message: format!("expected {n} job lines"),
                    })?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(SchedulingError::Parse {
                    line: line_no + 1,
                    message: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            let mut values = [Time::zero(); 3];
            for (slot, field) in values.iter_mut().zip(&fields) {
                *slot = parse_time(field).map_err(|e| SchedulingError::Parse {
                    line: line_no + 1,
                    message: e.to_string(),
                })?;
            }
            jobs.push(Job {
                release: values[0],
                processing: values[1],
                delivery: values[2],
            });
        }
        Self::new(jobs)
    }

    /// Writes the instance file format; `parse` reads it back exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n());
        for job in &self.jobs {
            out.push_str(&format!(
                "{} {} {}\n",
                format_time(job.release),
                format_time(job.processing),
                format_time(job.delivery)
            ));
        }
        out
    }
}

/// A processing order with its derived start times and maximal lateness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub order: Vec<usize>,
    /// Start time of the job at each position.
    pub start_times: Vec<Time>,
    pub max_lateness: Time,
}

fn validate_permutation(order: &[usize], n: usize) -> Result<(), SchedulingError> {
    if order.len() != n {
        return Err(SchedulingError::NotAPermutation { n });
    }
    let mut seen = vec![false; n];
    for &job in order {
        if job >= n || seen[job] {
            return Err(SchedulingError::NotAPermutation { n });
        }
        seen[job] = true;
    }
    Ok(())
}

/// Evaluates a processing order: jobs start as soon as the machine is free
/// and the job is released (no deliberate idling), and the maximal lateness
/// is the latest completion-plus-delivery over all positions.
pub fn evaluate_schedule(
    instance: &SchedulingInstance,
    order: &[usize],
) -> Result<Schedule, SchedulingError> {
    validate_permutation(order, instance.n())?;
    let mut start_times = Vec::with_capacity(order.len());
    let mut completion = Time::zero();
    let mut max_lateness = Time::zero();
    for &job_index in order {
        let job = instance.job(job_index);
        let start = completion.max(job.release);
        completion = start + job.processing;
        max_lateness = max_lateness.max(completion + job.delivery);
        start_times.push(start);
    }
    Ok(Schedule {
        order: order.to_vec(),
        start_times,
        max_lateness,
    })
}

/// The long/short job split for a given `eps`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsilonPartition {
    eps: Time,
    long_threshold: Time,
    long: Vec<bool>,
    long_jobs: Vec<usize>,
}

/// Splits the jobs at the threshold `eps * total_processing`. A job with
/// zero processing time is never long, which keeps the `|B| <= 1/eps` count
/// bound meaningful on degenerate all-zero instances.
pub fn long_jobs(
    instance: &SchedulingInstance,
    eps: Time,
) -> Result<EpsilonPartition, SchedulingError> {
    if eps <= Time::zero() {
        return Err(SchedulingError::NonPositiveEpsilon(format_time(eps)));
    }
    let long_threshold = eps * instance.total_processing();
    let long: Vec<bool> = instance
        .jobs()
        .iter()
        .map(|job| job.processing >= long_threshold && job.processing > Time::zero())
        .collect();
    let long_jobs: Vec<usize> = (0..instance.n()).filter(|&i| long[i]).collect();
    debug_assert!(
        Time::from_integer(long_jobs.len() as i64) * eps <= Time::from_integer(1),
        "long-job count exceeds 1/eps"
    );
    Ok(EpsilonPartition {
        eps,
        long_threshold,
        long,
        long_jobs,
    })
}

impl EpsilonPartition {
    pub fn eps(&self) -> Time {
        self.eps
    }

    pub fn long_threshold(&self) -> Time {
        self.long_threshold
    }

    pub fn is_long(&self, job: usize) -> bool {
        self.long[job]
    }

    /// Long-job indices in ascending order.
    pub fn long_jobs(&self) -> &[usize] {
        &self.long_jobs
    }

    pub fn long_count(&self) -> usize {
        self.long_jobs.len()
    }

    /// Number of injective repositioning maps: `n * (n-1) * ...` over
    /// `long_count` factors (one when there are no long jobs).
    pub fn repositioning_map_count(&self, n: usize) -> u64 {
        let mut count = 1u64;
        for k in 0..self.long_count() {
            count *= (n - k) as u64;
        }
        count
    }
}

/// An injective assignment of every long job to a schedule position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepositioningMap {
    by_job: BTreeMap<usize, usize>,
    by_position: BTreeMap<usize, usize>,
}

impl RepositioningMap {
    pub fn new(
        assignment: BTreeMap<usize, usize>,
        partition: &EpsilonPartition,
        n: usize,
    ) -> Result<Self, SchedulingError> {
        if assignment.len() != partition.long_count()
            || !assignment.keys().all(|&job| partition.is_long(job))
        {
            return Err(SchedulingError::InvalidRepositioningMap);
        }
        let mut by_position = BTreeMap::new();
        for (&job, &position) in &assignment {
            if position >= n || by_position.insert(position, job).is_some() {
                return Err(SchedulingError::InvalidRepositioningMap);
            }
        }
        Ok(RepositioningMap {
            by_job: assignment,
            by_position,
        })
    }

    pub fn empty() -> Self {
        RepositioningMap {
            by_job: BTreeMap::new(),
            by_position: BTreeMap::new(),
        }
    }

    pub fn position_of(&self, job: usize) -> Option<usize> {
        self.by_job.get(&job).copied()
    }

    pub fn job_at(&self, position: usize) -> Option<usize> {
        self.by_position.get(&position).copied()
    }

    pub fn assignments(&self) -> &BTreeMap<usize, usize> {
        &self.by_job
    }
}

/// Enumerates every repositioning map (all injective placements of the long
/// jobs), in a deterministic lexicographic order. Exponential in the number
/// of long jobs; intended for oracles and reports on small instances.
pub fn enumerate_repositioning_maps(
    n: usize,
    partition: &EpsilonPartition,
) -> Vec<RepositioningMap> {
    fn recurse(
        jobs: &[usize],
        depth: usize,
        n: usize,
        used: &mut Vec<bool>,
        current: &mut BTreeMap<usize, usize>,
        partition: &EpsilonPartition,
        maps: &mut Vec<RepositioningMap>,
    ) {
        if depth == jobs.len() {
            maps.push(
                RepositioningMap::new(current.clone(), partition, n)
                    .expect("enumerated assignment is injective by construction"),
            );
            return;
        }
        for position in 0..n {
            if !used[position] {
                used[position] = true;
                current.insert(jobs[depth], position);
                recurse(jobs, depth + 1, n, used, current, partition, maps);
                current.remove(&jobs[depth]);
                used[position] = false;
            }
        }
    }
    let jobs = partition.long_jobs();
    let mut maps = Vec::new();
    let mut used = vec![false; n];
    let mut current = BTreeMap::new();
    recurse(jobs, 0, n, &mut used, &mut current, partition, &mut maps);
    maps
}

/// The decision data for the next unpinned position: the time the machine
/// can act (its free time, or the earliest release among unscheduled short
/// jobs if it must idle), the longest delivery among those released by then,
/// and the smallest-index job attaining it.
struct ShortDecision {
    avail_time: Time,
    best_delivery: Time,
    best_job: usize,
}

fn short_decision(
    instance: &SchedulingInstance,
    partition: &EpsilonPartition,
    scheduled: &[bool],
    completion: Time,
) -> Option<ShortDecision> {
    let mut min_release: Option<Time> = None;
    for (job, done) in scheduled.iter().enumerate() {
        if !done && !partition.is_long(job) {
            let r = instance.job(job).release;
            min_release = Some(match min_release {
                Some(m) => m.min(r),
                None => r,
            });
        }
    }
    let avail_time = completion.max(min_release?);
    let mut best: Option<(Time, usize)> = None;
    for (job, done) in scheduled.iter().enumerate() {
        if !done && !partition.is_long(job) && instance.job(job).release <= avail_time {
            let q = instance.job(job).delivery;
            match best {
                Some((best_q, _)) if best_q >= q => {}
                _ => best = Some((q, job)),
            }
        }
    }
    let (best_delivery, best_job) = best.expect("some short job is released by avail_time");
    Some(ShortDecision {
        avail_time,
        best_delivery,
        best_job,
    })
}

fn advance(instance: &SchedulingInstance, completion: Time, job: usize) -> Time {
    let j = instance.job(job);
    completion.max(j.release) + j.processing
}

/// The prefix level of `order` under one fixed repositioning map: the number
/// of leading positions where a pinned position holds exactly its assigned
/// long job and every other position holds an available short job with the
/// longest delivery time (delivery-time equality, not job identity).
pub fn jackson_prefix_level(
    instance: &SchedulingInstance,
    partition: &EpsilonPartition,
    phi: &RepositioningMap,
    order: &[usize],
) -> usize {
    debug_assert!(validate_permutation(order, instance.n()).is_ok());
    let n = instance.n();
    let mut scheduled = vec![false; n];
    let mut completion = Time::zero();
    for (h, &job) in order.iter().enumerate() {
        let ok = match phi.job_at(h) {
            Some(pinned) => job == pinned,
            None => {
                if partition.is_long(job) {
                    false
                } else {
                    match short_decision(instance, partition, &scheduled, completion) {
                        Some(d) => {
                            instance.job(job).release <= d.avail_time
                                && instance.job(job).delivery == d.best_delivery
                        }
                        None => false,
                    }
                }
            }
        };
        if !ok {
            return h;
        }
        completion = advance(instance, completion, job);
        scheduled[job] = true;
    }
    n
}

/// The auxiliary fitness of `order`: its best prefix level over every
/// repositioning map, computed in one left-to-right scan.
///
/// A long job is always consistent with some map pinning it where it sits,
/// so only the short-job positions constrain the level; this makes the scan
/// equal to the explicit maximum over all maps (cross-checked against
/// [`enumerate_repositioning_maps`] in the tests).
pub fn aux_fitness_max(
    instance: &SchedulingInstance,
    partition: &EpsilonPartition,
    order: &[usize],
) -> usize {
    debug_assert!(validate_permutation(order, instance.n()).is_ok());
    let n = instance.n();
    let mut scheduled = vec![false; n];
    let mut completion = Time::zero();
    for (h, &job) in order.iter().enumerate() {
        let ok = if partition.is_long(job) {
            true
        } else {
            match short_decision(instance, partition, &scheduled, completion) {
                Some(d) => {
                    instance.job(job).release <= d.avail_time
                        && instance.job(job).delivery == d.best_delivery
                }
                None => false,
            }
        };
        if !ok {
            return h;
        }
        completion = advance(instance, completion, job);
        scheduled[job] = true;
    }
    n
}

/// Suffix recombination: the child keeps the first `level` entries of `pi`;
/// the remaining jobs are listed in their `sigma` order and then permuted by
/// `zeta` (`child_suffix[l] = sigma_order[zeta[l]]`).
pub fn recombine(
    pi: &[usize],
    sigma: &[usize],
    level: usize,
    zeta: &[usize],
) -> Result<Vec<usize>, SchedulingError> {
    let n = pi.len();
    validate_permutation(pi, n)?;
    validate_permutation(sigma, n)?;
    if level > n {
        return Err(SchedulingError::LevelOutOfRange { level, n });
    }
    if zeta.len() != n - level {
        return Err(SchedulingError::SuffixLengthMismatch {
            got: zeta.len(),
            expected: n - level,
        });
    }
    validate_permutation(zeta, n - level)?;
    let mut in_prefix = vec![false; n];
    for &job in &pi[..level] {
        in_prefix[job] = true;
    }
    let sigma_order: Vec<usize> = sigma.iter().copied().filter(|&j| !in_prefix[j]).collect();
    let mut child = pi[..level].to_vec();
    child.extend(zeta.iter().map(|&l| sigma_order[l]));
    Ok(child)
}

/// Swap mutation with Jackson rebuild. Positions `a` and `b` are swapped
/// only when one of them holds a long job; the schedule is then rebuilt from
/// `min(a, b)` up to (excluding) `level` by the partial Jackson rule with
/// the long jobs pinned where they now sit, and the jobs left over keep
/// their post-swap relative order. When neither job is long the schedule is
/// returned unchanged.
pub fn mutate(
    instance: &SchedulingInstance,
    partition: &EpsilonPartition,
    order: &[usize],
    a: usize,
    b: usize,
    level: usize,
) -> Result<Vec<usize>, SchedulingError> {
    let n = instance.n();
    validate_permutation(order, n)?;
    if a >= n {
        return Err(SchedulingError::PositionOutOfRange { position: a, n });
    }
    if b >= n {
        return Err(SchedulingError::PositionOutOfRange { position: b, n });
    }
    if level > n {
        return Err(SchedulingError::LevelOutOfRange { level, n });
    }
    if !partition.is_long(order[a]) && !partition.is_long(order[b]) {
        return Ok(order.to_vec());
    }
    let mut swapped = order.to_vec();
    swapped.swap(a, b);
    let lo = a.min(b);
    if lo >= level {
        return Ok(swapped);
    }

    let mut scheduled = vec![false; n];
    let mut completion = Time::zero();
    let mut result: Vec<usize> = Vec::with_capacity(n);
    for &job in &swapped[..lo] {
        completion = advance(instance, completion, job);
        scheduled[job] = true;
        result.push(job);
    }
    for h in lo..level {
        let job = if partition.is_long(swapped[h]) {
            // Pinned: the long job stays exactly where the swap put it.
            swapped[h]
        } else {
            short_decision(instance, partition, &scheduled, completion)
                .expect("an unpinned rebuild position always has an unscheduled short job")
                .best_job
        };
        completion = advance(instance, completion, job);
        scheduled[job] = true;
        result.push(job);
    }
    for &job in &swapped {
        if !scheduled[job] {
            result.push(job);
        }
    }
    Ok(result)
}

/// Builds the schedule that follows the partial Jackson rule for `phi` at
/// every position: pinned positions hold their long job, all others take an
/// available short job with the longest delivery time (ties broken by the
/// smallest job index). The result has prefix level `n` under `phi`.
pub fn jackson_schedule(
    instance: &SchedulingInstance,
    partition: &EpsilonPartition,
    phi: &RepositioningMap,
) -> Vec<usize> {
    let n = instance.n();
    let mut scheduled = vec![false; n];
    let mut completion = Time::zero();
    let mut order = Vec::with_capacity(n);
    for h in 0..n {
        let job = match phi.job_at(h) {
            Some(pinned) => pinned,
            None => {
                short_decision(instance, partition, &scheduled, completion)
                    .expect("an unpinned position always has an unscheduled short job")
                    .best_job
            }
        };
        completion = advance(instance, completion, job);
        scheduled[job] = true;
        order.push(job);
    }
    order
}

/// Whether the schedule's lateness is within the `(1 + eps)` factor of the
/// exact optimum `j_star`.
pub fn satisfactory(
    instance: &SchedulingInstance,
    eps: Time,
    order: &[usize],
    j_star: Time,
) -> Result<bool, SchedulingError> {
    let schedule = evaluate_schedule(instance, order)?;
    Ok(schedule.max_lateness <= (Time::from_integer(1) + eps) * j_star)
}

/// Outcome of the top-level connectivity search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopLevelConnectivity {
    /// No long jobs: there is a single top-level class, nothing to connect.
    Vacuous,
    /// Every top-level schedule reaches every repositioning-map class under
    /// repeated top-level swap mutations.
    Verified {
        top_level_schedules: usize,
        classes: usize,
    },
    /// The exhaustive search was not attempted.
    Skipped { reason: String },
}

/// Design-condition report for one instance and `eps`.
#[derive(Debug, Clone)]
pub struct ConditionsReport {
    pub eps: Time,
    pub long_count: usize,
    /// Number of repositioning maps and the polynomial cap `n^(1/eps)`.
    pub family_count: u64,
    pub family_count_bound: f64,
    pub family_count_ok: bool,
    /// Levels range over `0..=n`.
    pub top_level: usize,
    pub optimum: Time,
    pub approx_threshold: Time,
    /// Lowest lateness over the per-map Jackson constructions.
    pub best_top_level_lateness: Time,
    /// Some top-level class is within the approximation threshold.
    pub top_level_satisfactory: bool,
    pub connectivity: TopLevelConnectivity,
}

/// Verifies the design conditions on a small instance: the polynomial count
/// of repositioning maps, the integer level range, the existence of a
/// top-level class within the approximation threshold (against the
/// brute-force optimum), and — when exhaustive search is feasible — that
/// top-level swap mutations connect every top-level schedule to every class.
pub fn check_design_conditions(
    instance: &SchedulingInstance,
    eps: Time,
) -> Result<ConditionsReport, SchedulingError> {
    let n = instance.n();
    let partition = long_jobs(instance, eps)?;
    let family_count = partition.repositioning_map_count(n);
    let family_count_bound = (n as f64).powf(crate::time::time_to_f64(eps).recip());
    let family_count_ok = (family_count as f64) <= family_count_bound + 1e-9;

    let optimum = crate::exact_solver::optimum_lateness(instance, n.max(10))?.optimum;
    let approx_threshold = (Time::from_integer(1) + eps) * optimum;
    let maps = enumerate_repositioning_maps(n, &partition);
    let best_top_level_lateness = maps
        .iter()
        .map(|phi| {
            let order = jackson_schedule(instance, &partition, phi);
            evaluate_schedule(instance, &order)
                .expect("constructed order is a permutation")
                .max_lateness
        })
        .min()
        .expect("at least the empty map exists");
    let top_level_satisfactory = best_top_level_lateness <= approx_threshold;

    let connectivity = if partition.long_count() == 0 {
        TopLevelConnectivity::Vacuous
    } else if n > 8 || partition.long_count() > 2 {
        TopLevelConnectivity::Skipped {
            reason: format!(
                "exhaustive search limited to n <= 8 with at most 2 long jobs (n = {n}, long = {})",
                partition.long_count()
            ),
        }
    } else {
        verify_top_level_connectivity(instance, &partition)
    };

    Ok(ConditionsReport {
        eps,
        long_count: partition.long_count(),
        family_count,
        family_count_bound,
        family_count_ok,
        top_level: n,
        optimum,
        approx_threshold,
        best_top_level_lateness,
        top_level_satisfactory,
        connectivity,
    })
}

/// The class of a top-level schedule is the placement of its long jobs.
fn long_placement(partition: &EpsilonPartition, order: &[usize]) -> Vec<usize> {
    partition
        .long_jobs()
        .iter()
        .map(|&job| order.iter().position(|&x| x == job).expect("job present"))
        .collect()
}

fn verify_top_level_connectivity(
    instance: &SchedulingInstance,
    partition: &EpsilonPartition,
) -> TopLevelConnectivity {
    let n = instance.n();
    let mut nodes: Vec<Vec<usize>> = Vec::new();
    let mut index: std::collections::HashMap<Vec<usize>, usize> = std::collections::HashMap::new();
    let mut order: Vec<usize> = (0..n).collect();
    loop {
        if aux_fitness_max(instance, partition, &order) == n {
            index.insert(order.clone(), nodes.len());
            nodes.push(order.clone());
        }
        if !next_permutation(&mut order) {
            break;
        }
    }

    let mut class_ids: std::collections::HashMap<Vec<usize>, usize> =
        std::collections::HashMap::new();
    let mut node_class = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let placement = long_placement(partition, node);
        let next_id = class_ids.len();
        let id = *class_ids.entry(placement).or_insert(next_id);
        node_class.push(id);
    }
    let classes = class_ids.len();

    let mut successors: Vec<Vec<usize>> = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let child =
                    mutate(instance, partition, node, a, b, n).expect("indices are in range");
                let child_idx = *index
                    .get(&child)
                    .expect("top-level swap mutation preserves the top level");
                out.push(child_idx);
            }
        }
        out.sort_unstable();
        out.dedup();
        successors.push(out);
    }

    // Reachable class sets via the strongly connected component condensation.
    let sccs = strongly_connected_components(&successors);
    let scc_count = sccs.iter().copied().max().map_or(0, |x| x + 1);
    let words = classes.div_ceil(64);
    let mut scc_classes = vec![vec![0u64; words]; scc_count];
    let mut scc_successors: Vec<Vec<usize>> = vec![Vec::new(); scc_count];
    for (node, &scc) in sccs.iter().enumerate() {
        let class = node_class[node];
        scc_classes[scc][class / 64] |= 1 << (class % 64);
        for &succ in &successors[node] {
            if sccs[succ] != scc {
                scc_successors[scc].push(sccs[succ]);
            }
        }
    }
    // Tarjan numbers components in reverse topological order, so components
    // 0, 1, 2, ... see their successors already complete.
    for scc in 0..scc_count {
        let succs = std::mem::take(&mut scc_successors[scc]);
        for &succ in &succs {
            for w in 0..words {
                let bits = scc_classes[succ][w];
                scc_classes[scc][w] |= bits;
            }
        }
    }
    let full: Vec<u64> = (0..words)
        .map(|w| {
            let bits = classes - w * 64;
            if bits >= 64 {
                u64::MAX
            } else {
                (1u64 << bits) - 1
            }
        })
        .collect();
    let all_reach = sccs.iter().all(|&scc| scc_classes[scc] == full);
    if all_reach {
        TopLevelConnectivity::Verified {
            top_level_schedules: nodes.len(),
            classes,
        }
    } else {
        TopLevelConnectivity::Skipped {
            reason: "some top-level schedule cannot reach every class".into(),
        }
    }
}

/// Iterative Tarjan; returns the component id per node, components numbered
/// in reverse topological order (successors get lower ids).
fn strongly_connected_components(successors: &[Vec<usize>]) -> Vec<usize> {
    let n = successors.len();
    let mut ids = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut disc = vec![usize::MAX; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut counter = 0usize;
    let mut comp = 0usize;
    let mut call_stack: Vec<(usize, usize)> = Vec::new();

    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        call_stack.push((start, 0));
        while let Some(&mut (v, ref mut edge)) = call_stack.last_mut() {
            if *edge == 0 {
                disc[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *edge < successors[v].len() {
                let w = successors[v][*edge];
                *edge += 1;
                if disc[w] == usize::MAX {
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                if low[v] == disc[v] {
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        ids[w] = comp;
                        if w == v {
                            break;
                        }
                    }
                    comp += 1;
                }
                call_stack.pop();
                if let Some(&mut (parent, _)) = call_stack.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    ids
}

/// In-place lexicographic next permutation; false when wrapped around.
pub(crate) fn next_permutation(order: &mut [usize]) -> bool {
    let n = order.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && order[i - 1] >= order[i] {
        i -= 1;
    }
    if i == 0 {
        order.reverse();
        return false;
    }
    let mut j = n - 1;
    while order[j] <= order[i - 1] {
        j -= 1;
    }
    order.swap(i - 1, j);
    order[i..].reverse();
    true
}

/// The scheduling problem wired up for the EA engine: genomes are
/// permutations, the objective is maximal lateness (minimised), and the
/// auxiliary level is the best Jackson prefix level.
#[derive(Debug, Clone)]
pub struct SchedulingProblem {
    instance: SchedulingInstance,
    partition: EpsilonPartition,
}

impl SchedulingProblem {
    pub fn new(instance: SchedulingInstance, eps: Time) -> Result<Self, SchedulingError> {
        let partition = long_jobs(&instance, eps)?;
        Ok(SchedulingProblem {
            instance,
            partition,
        })
    }

    pub fn instance(&self) -> &SchedulingInstance {
        &self.instance
    }

    pub fn partition(&self) -> &EpsilonPartition {
        &self.partition
    }

    pub fn eps(&self) -> Time {
        self.partition.eps()
    }
}

impl Problem for SchedulingProblem {
    type Genome = Vec<usize>;
    type Objective = Time;

    fn aux_level(&self, genome: &Vec<usize>) -> usize {
        aux_fitness_max(&self.instance, &self.partition, genome)
    }

    fn objective(&self, genome: &Vec<usize>) -> Time {
        evaluate_schedule(&self.instance, genome)
            .expect("genomes are valid permutations")
            .max_lateness
    }

    fn top_level(&self) -> usize {
        self.instance.n()
    }
}

/// Precomputed factorials that fit in `u64` (`0! ..= 20!`).
pub(crate) fn factorial(k: usize) -> u64 {
    const TABLE: [u64; 21] = {
        let mut t = [1u64; 21];
        let mut i = 1;
        while i < 21 {
            t[i] = t[i - 1] * i as u64;
            i += 1;
        }
        t
    };
    TABLE[k]
}

/// Decodes `rank` in `0..len!` into a permutation of `0..len` via the
/// factorial number system.
pub fn unrank_permutation(mut rank: u64, len: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..len).collect();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let f = factorial(len - 1 - i);
        let digit = (rank / f) as usize;
        rank %= f;
        out.push(pool.remove(digit));
    }
    out
}

/// The family of suffix recombinations at one level, indexed by the rank of
/// the suffix reordering.
pub struct SuffixRecombination {
    n: usize,
    level: usize,
}

impl SuffixRecombination {
    pub fn new(n: usize, level: usize) -> Self {
        SuffixRecombination { n, level }
    }
}

impl RecombinationOps<Vec<usize>> for SuffixRecombination {
    fn count(&self) -> Option<u64> {
        if self.n - self.level > 20 {
            return None;
        }
        Some(factorial(self.n - self.level))
    }

    fn apply(&self, op: u64, first: &Vec<usize>, second: &Vec<usize>) -> Vec<usize> {
        let zeta = unrank_permutation(op, self.n - self.level);
        recombine(first, second, self.level, &zeta)
            .expect("operator index decodes to a valid suffix reordering")
    }
}

/// The family of swap mutations at one level, indexed by the position pair
/// `(a, b)` in row-major order.
pub struct SwapMutation {
    instance: SchedulingInstance,
    partition: EpsilonPartition,
    level: usize,
}

impl SwapMutation {
    pub fn new(instance: SchedulingInstance, partition: EpsilonPartition, level: usize) -> Self {
        SwapMutation {
            instance,
            partition,
            level,
        }
    }
}

impl MutationOps<Vec<usize>> for SwapMutation {
    fn count(&self) -> Option<u64> {
        let n = self.instance.n() as u64;
        Some(n * n)
    }

    fn apply(&self, op: u64, genome: &Vec<usize>) -> Vec<usize> {
        let n = self.instance.n() as u64;
        let a = (op / n) as usize;
        let b = (op % n) as usize;
        mutate(&self.instance, &self.partition, genome, a, b, self.level)
            .expect("operator index decodes to valid positions")
    }
}

/// The level-guided strategy: at level `q` the recombination family keeps a
/// `q`-prefix, the mutation family rebuilds up to `q`, both families chosen
/// deterministically from the subject's cached level, uniform within the
/// family, ordered pairs without replacement, hybrid-elitist selection.
pub fn jackson_strategy(problem: &SchedulingProblem) -> StrategyProfile<SchedulingProblem> {
    let n = problem.instance().n();
    let recombination_families: Vec<Box<dyn RecombinationOps<Vec<usize>>>> = (0..=n)
        .map(|level| Box::new(SuffixRecombination::new(n, level)) as _)
        .collect();
    let mutation_families: Vec<Box<dyn MutationOps<Vec<usize>>>> = (0..=n)
        .map(|level| {
            Box::new(SwapMutation::new(
                problem.instance().clone(),
                problem.partition().clone(),
                level,
            )) as _
        })
        .collect();
    let families = n + 1;
    StrategyProfile {
        recombination_families,
        mutation_families,
        recombination_choice: Box::new(move |ctx| {
            IndexDistribution::point(ctx.subject.aux_level, families)
        }),
        mutation_choice: Box::new(move |ctx| {
            IndexDistribution::point(ctx.subject.aux_level, families)
        }),
        pair_sampling: PairSampling::WithoutReplacement,
        selection: SelectionRule::HybridElitist,
    }
}

/// The nested schema at level `q`: schedules whose auxiliary fitness is at
/// least `q`.
pub fn level_schema(problem: &SchedulingProblem, q: usize) -> SchemaPredicate<'_, Vec<usize>> {
    SchemaPredicate::new(format!("aux_level>={q}"), move |order: &Vec<usize>| {
        aux_fitness_max(problem.instance(), problem.partition(), order) >= q
    })
}

/// The per-level drift table of the level-guided design: leaving level `k`
/// succeeds with probability at least `(1 - (1 - 1/m)^m) / (n - k)` per
/// generation, and level preservation under mutation is certain.
pub fn level_drift_table(n: usize, m: usize) -> DriftLevelTable {
    let c = 1.0 - (1.0 - 1.0 / m as f64).powi(m as i32);
    let levels: Vec<f64> = (0..n).map(|k| c / (n - k) as f64).collect();
    DriftLevelTable::new(levels, m).expect("drift entries are in (0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn t(v: i64) -> Time {
        Time::from_integer(v)
    }

    fn half() -> Time {
        Ratio::new(1, 2)
    }

    #[test]
    fn single_job_schedule() {
        let instance = SchedulingInstance::from_integers(&[(0, 2, 3)]).unwrap();
        let schedule = evaluate_schedule(&instance, &[0]).unwrap();
        assert_eq!(schedule.start_times, vec![t(0)]);
        assert_eq!(schedule.max_lateness, t(5));
    }

    #[test]
    fn two_job_schedule_both_orders() {
        let instance = SchedulingInstance::from_integers(&[(0, 2, 5), (1, 3, 1)]).unwrap();
        assert_eq!(
            evaluate_schedule(&instance, &[0, 1]).unwrap().max_lateness,
            t(7)
        );
        assert_eq!(
            evaluate_schedule(&instance, &[1, 0]).unwrap().max_lateness,
            t(11)
        );
    }

    #[test]
    fn zero_release_and_delivery_gives_total_processing() {
        let instance =
            SchedulingInstance::from_integers(&[(0, 2, 0), (0, 3, 0), (0, 4, 0)]).unwrap();
        let total = instance.total_processing();
        let mut order = vec![0usize, 1, 2];
        loop {
            assert_eq!(
                evaluate_schedule(&instance, &order).unwrap().max_lateness,
                total
            );
            if !next_permutation(&mut order) {
                break;
            }
        }
    }

    #[test]
    fn rejects_invalid_permutations() {
        let instance = SchedulingInstance::from_integers(&[(0, 1, 0), (0, 1, 0)]).unwrap();
        assert!(evaluate_schedule(&instance, &[0, 0]).is_err());
        assert!(evaluate_schedule(&instance, &[0]).is_err());
        assert!(evaluate_schedule(&instance, &[0, 2]).is_err());
    }

    #[test]
    fn long_job_partition_thresholds() {
        let instance =
            SchedulingInstance::from_integers(&[(0, 4, 0), (0, 1, 0), (0, 1, 0)]).unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        assert_eq!(partition.long_threshold(), t(3));
        assert_eq!(partition.long_jobs(), &[0]);
    }

    #[test]
    fn boundary_partition_hits_the_count_cap() {
        let instance = SchedulingInstance::from_integers(&[(0, 2, 0), (0, 2, 0)]).unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        assert_eq!(partition.long_threshold(), t(2));
        assert_eq!(partition.long_jobs(), &[0, 1]);
    }

    #[test]
    fn eps_at_least_one_usually_empties_the_long_set() {
        let instance =
            SchedulingInstance::from_integers(&[(0, 2, 1), (0, 3, 2), (1, 4, 0)]).unwrap();
        let partition = long_jobs(&instance, t(1)).unwrap();
        assert_eq!(partition.long_count(), 0);
    }

    #[test]
    fn dominant_job_stays_long_at_eps_one() {
        let instance = SchedulingInstance::from_integers(&[(0, 5, 0)]).unwrap();
        let partition = long_jobs(&instance, t(1)).unwrap();
        assert_eq!(partition.long_jobs(), &[0]);
    }

    #[test]
    fn all_zero_processing_has_no_long_jobs() {
        let instance = SchedulingInstance::from_integers(&[(0, 0, 1), (0, 0, 2)]).unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        assert_eq!(partition.long_count(), 0);
    }

    #[test]
    fn rejects_nonpositive_eps() {
        let instance = SchedulingInstance::from_integers(&[(0, 1, 0)]).unwrap();
        assert!(long_jobs(&instance, t(0)).is_err());
        assert!(long_jobs(&instance, t(-1)).is_err());
    }

    #[test]
    fn prefix_level_on_the_two_job_example() {
        let instance = SchedulingInstance::from_integers(&[(0, 1, 3), (0, 1, 1)]).unwrap();
        let partition = long_jobs(&instance, t(1)).unwrap();
        assert_eq!(partition.long_count(), 0);
        let phi = RepositioningMap::empty();
        assert_eq!(jackson_prefix_level(&instance, &partition, &phi, &[0, 1]), 2);
        assert_eq!(jackson_prefix_level(&instance, &partition, &phi, &[1, 0]), 0);
        assert_eq!(aux_fitness_max(&instance, &partition, &[1, 0]), 0);
    }

    #[test]
    fn single_job_is_always_level_one() {
        for eps in [half(), t(1), t(3)] {
            let instance = SchedulingInstance::from_integers(&[(2, 3, 1)]).unwrap();
            let partition = long_jobs(&instance, eps).unwrap();
            assert_eq!(aux_fitness_max(&instance, &partition, &[0]), 1);
        }
    }

    #[test]
    fn pinned_long_job_at_the_first_position() {
        let instance =
            SchedulingInstance::from_integers(&[(0, 6, 1), (0, 1, 5), (0, 1, 2)]).unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        assert_eq!(partition.long_jobs(), &[0]);
        let mut assignment = BTreeMap::new();
        assignment.insert(0usize, 0usize);
        let phi = RepositioningMap::new(assignment, &partition, 3).unwrap();
        assert!(jackson_prefix_level(&instance, &partition, &phi, &[0, 1, 2]) >= 1);
    }

    #[test]
    fn jackson_construction_reaches_the_top_level() {
        let instance =
            SchedulingInstance::from_integers(&[(0, 6, 1), (2, 1, 5), (0, 1, 2), (1, 2, 4)])
                .unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        for phi in enumerate_repositioning_maps(instance.n(), &partition) {
            let order = jackson_schedule(&instance, &partition, &phi);
            assert_eq!(
                jackson_prefix_level(&instance, &partition, &phi, &order),
                instance.n()
            );
            assert_eq!(aux_fitness_max(&instance, &partition, &order), instance.n());
        }
    }

    #[test]
    fn suffix_recombination_keeps_prefix_and_reorders_rest() {
        let pi = vec![0, 1, 2, 3];
        let sigma = vec![3, 2, 1, 0];
        // Suffix jobs {2, 3} appear in sigma as (3, 2).
        let child = recombine(&pi, &sigma, 2, &[0, 1]).unwrap();
        assert_eq!(child, vec![0, 1, 3, 2]);
        let child = recombine(&pi, &sigma, 2, &[1, 0]).unwrap();
        assert_eq!(child, vec![0, 1, 2, 3]);
    }

    #[test]
    fn full_prefix_recombination_copies_the_first_parent() {
        let pi = vec![2, 0, 1];
        for sigma in [[0usize, 1, 2], [2, 1, 0], [1, 2, 0]] {
            assert_eq!(recombine(&pi, &sigma, 3, &[]).unwrap(), pi);
        }
    }

    #[test]
    fn recombination_validates_suffix_length() {
        let pi = vec![0, 1, 2];
        let sigma = vec![0, 1, 2];
        assert!(matches!(
            recombine(&pi, &sigma, 1, &[0]),
            Err(SchedulingError::SuffixLengthMismatch { .. })
        ));
    }

    #[test]
    fn mutation_without_long_jobs_is_identity() {
        let instance =
            SchedulingInstance::from_integers(&[(0, 1, 3), (0, 1, 1), (0, 1, 2)]).unwrap();
        let partition = long_jobs(&instance, t(1)).unwrap();
        let order = vec![2, 0, 1];
        for a in 0..3 {
            for b in 0..3 {
                for level in 0..=3 {
                    assert_eq!(
                        mutate(&instance, &partition, &order, a, b, level).unwrap(),
                        order
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_swap_still_rebuilds() {
        let instance =
            SchedulingInstance::from_integers(&[(0, 6, 1), (0, 1, 5), (0, 1, 2)]).unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        // a == b on the long job keeps it pinned where it sits and rebuilds
        // from that position: the suffix gets reordered by delivery time
        // (job 1 outdelivers job 2).
        let order = vec![0, 2, 1];
        let mutated = mutate(&instance, &partition, &order, 0, 0, 3).unwrap();
        assert_eq!(mutated, vec![0, 1, 2]);
        assert_eq!(aux_fitness_max(&instance, &partition, &mutated), 3);
        // Positions before the swap index are untouched even when they break
        // the Jackson order.
        let order = vec![2, 0, 1];
        let mutated = mutate(&instance, &partition, &order, 1, 1, 3).unwrap();
        assert_eq!(mutated, vec![2, 0, 1]);
    }

    #[test]
    fn mutation_validates_indices() {
        let instance = SchedulingInstance::from_integers(&[(0, 1, 0), (0, 1, 0)]).unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        assert!(matches!(
            mutate(&instance, &partition, &[0, 1], 2, 0, 1),
            Err(SchedulingError::PositionOutOfRange { .. })
        ));
        assert!(matches!(
            mutate(&instance, &partition, &[0, 1], 0, 0, 3),
            Err(SchedulingError::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn satisfactory_uses_the_relative_threshold() {
        let instance = SchedulingInstance::from_integers(&[(0, 2, 5), (1, 3, 1)]).unwrap();
        // Optimum is 7 (order 0,1); with eps = 1/2 the threshold is 10.5.
        assert!(satisfactory(&instance, half(), &[0, 1], t(7)).unwrap());
        assert!(!satisfactory(&instance, half(), &[1, 0], t(7)).unwrap());
        assert!(satisfactory(&instance, t(10), &[1, 0], t(7)).unwrap());
    }

    #[test]
    fn unrank_enumerates_all_permutations() {
        let mut seen = std::collections::HashSet::new();
        for rank in 0..24 {
            let p = unrank_permutation(rank, 4);
            assert!(validate_permutation(&p, 4).is_ok());
            seen.insert(p);
        }
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn instance_text_round_trips() {
        let text = "3\n0 2 5\n1.5 3 1\n0.25 0.75 2\n";
        let instance = SchedulingInstance::parse(text).unwrap();
        assert_eq!(instance.to_text(), text);
        assert_eq!(instance.job(1).release, Ratio::new(3, 2));
    }

    #[test]
    fn parse_reports_bad_lines() {
        assert!(matches!(
            SchedulingInstance::parse("2\n0 1 2\n0 x 2\n"),
            Err(SchedulingError::Parse { line: 3, .. })
        ));
        assert!(SchedulingInstance::parse("").is_err());
        assert!(SchedulingInstance::parse("2\n0 1 2\n").is_err());
    }

    #[test]
    fn conditions_report_on_a_short_instance() {
        let instance =
            SchedulingInstance::from_integers(&[(0, 1, 3), (0, 1, 1), (2, 1, 2)]).unwrap();
        let report = check_design_conditions(&instance, t(1)).unwrap();
        assert_eq!(report.family_count, 1);
        assert!(report.family_count_ok);
        assert!(report.top_level_satisfactory);
        assert_eq!(report.connectivity, TopLevelConnectivity::Vacuous);
    }

    #[test]
    fn conditions_report_connects_two_long_jobs() {
        // Two equal heavies over zero-length fillers: both long at eps = 1/2.
        let instance = SchedulingInstance::from_integers(&[
            (0, 10, 3),
            (0, 10, 1),
            (1, 0, 4),
            (0, 0, 2),
            (3, 0, 5),
        ])
        .unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        assert_eq!(partition.long_jobs(), &[0, 1]);
        let report = check_design_conditions(&instance, half()).unwrap();
        assert_eq!(report.family_count, 20);
        assert!(report.top_level_satisfactory);
        assert!(matches!(
            report.connectivity,
            TopLevelConnectivity::Verified { classes: 20, .. }
        ));
    }

    #[test]
    fn conditions_report_counts_maps_with_one_long_job() {
        let instance = SchedulingInstance::from_integers(&[
            (0, 10, 1),
            (0, 1, 5),
            (1, 2, 2),
            (0, 1, 4),
            (2, 1, 0),
            (0, 2, 3),
        ])
        .unwrap();
        let partition = long_jobs(&instance, half()).unwrap();
        assert_eq!(partition.long_count(), 1);
        let report = check_design_conditions(&instance, half()).unwrap();
        assert_eq!(report.family_count, 6);
        assert!(report.family_count_ok);
        assert!(report.top_level_satisfactory);
        assert!(matches!(
            report.connectivity,
            TopLevelConnectivity::Verified { classes: 6, .. }
        ));
    }
}
