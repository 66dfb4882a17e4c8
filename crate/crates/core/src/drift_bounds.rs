//! Variable-drift runtime bounds and an exact hitting-time oracle.
//!
//! The bound side: a table of per-level improvement probabilities turns into
//! an expected-time bound by summing reciprocals over the levels between the
//! start and the top, plus a polynomial term for the walk at the top level.
//! The oracle side: small absorbing Markov chains are solved exactly
//! (`E(T_x) = 1 + sum_y p(x -> y) E(T_y)`, zero on the target set) so the
//! bound can be checked against ground truth.

use std::collections::VecDeque;

use thiserror::Error;

use crate::engine::RunTrace;

/// Hard cap on the chain size the dense linear solve accepts.
pub const STATE_LIMIT: usize = 10_000;

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("drift table must contain at least one level")]
    EmptyTable,
    #[error("drift entry {index} is {value}, outside (0, 1]")]
    InvalidLevelBound { index: usize, value: f64 },
    #[error("degenerate design: {what}")]
    DegenerateDesign { what: String },
    #[error("start distance {start} exceeds the table size {levels}")]
    StartDistanceTooLarge { start: usize, levels: usize },
    #[error("parameter out of range: {what}")]
    Domain { what: String },
    #[error("transition row {state} sums to {sum}, not 1")]
    RowSumInvalid { state: usize, sum: f64 },
    #[error("transition row {state} has a negative entry")]
    NegativeTransition { state: usize },
    #[error("distance values inconsistent: {what}")]
    DistanceMismatch { what: String },
    #[error("state {state} cannot reach the target set")]
    UnreachableTarget { state: usize },
    #[error("drift condition violated at distance {level}: minimum drift {value}")]
    DriftConditionViolated { level: usize, value: f64 },
    #[error("chain has {states} states, above the limit {limit}")]
    StateLimitExceeded { states: usize, limit: usize },
    #[error("linear solve residual {residual} above tolerance")]
    NumericalFailure { residual: f64 },
    #[error("chain parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no traces supplied")]
    NoTraces,
}

/// Per-level improvement lower bounds `l_k` for levels `0..M-1`, together
/// with the population size they were computed for.
#[derive(Debug, Clone)]
pub struct DriftLevelTable {
    levels: Vec<f64>,
    m: usize,
}

impl DriftLevelTable {
    pub fn new(levels: Vec<f64>, m: usize) -> Result<Self, DriftError> {
        if levels.is_empty() {
            return Err(DriftError::EmptyTable);
        }
        for (index, &value) in levels.iter().enumerate() {
            if !(value > 0.0 && value <= 1.0) {
                return Err(DriftError::InvalidLevelBound { index, value });
            }
        }
        Ok(DriftLevelTable { levels, m })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// The top level `M`.
    pub fn top_level(&self) -> usize {
        self.levels.len()
    }

    pub fn population_size(&self) -> usize {
        self.m
    }
}

/// The per-generation improvement bound at one level, in both the
/// finite-population form and its limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelBound {
    /// `(1 - (1 - 1/m)^m) * p_rec * p_mut`
    pub variable: f64,
    /// `(1 - 1/e) * p_rec * p_mut`
    pub constant: f64,
}

/// Combines the probability that recombination improves the level with the
/// probability that mutation preserves the improvement. The finite-`m`
/// factor `1 - (1 - 1/m)^m` always exceeds its limit `1 - 1/e`, so the
/// variable form dominates the constant one.
pub fn level_improvement_bound(m: usize, p_rec: f64, p_mut: f64) -> Result<LevelBound, DriftError> {
    if m < 2 {
        return Err(DriftError::Domain {
            what: format!("population size m = {m} must be at least 2"),
        });
    }
    for (name, value) in [("p_rec", p_rec), ("p_mut", p_mut)] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(DriftError::DegenerateDesign {
                what: format!("{name} = {value} outside (0, 1]"),
            });
        }
    }
    let finite = 1.0 - (1.0 - 1.0 / m as f64).powi(m as i32);
    let limit = 1.0 - (-1.0f64).exp();
    Ok(LevelBound {
        variable: finite * p_rec * p_mut,
        constant: limit * p_rec * p_mut,
    })
}

/// Expected-time bound for climbing `start_distance` levels to the top:
/// the sum of `1 / l_k` over the `start_distance` levels directly below the
/// top (a start at distance `d` sits at level `M - d` and must leave levels
/// `M - d, ..., M - 1`).
pub fn variable_drift_bound(
    table: &DriftLevelTable,
    start_distance: usize,
) -> Result<f64, DriftError> {
    let m_top = table.top_level();
    if start_distance > m_top {
        return Err(DriftError::StartDistanceTooLarge {
            start: start_distance,
            levels: m_top,
        });
    }
    if start_distance == 0 {
        return Ok(0.0);
    }
    Ok(table.levels[m_top - start_distance..]
        .iter()
        .map(|l| 1.0 / l)
        .sum())
}

/// The full expected-runtime bound: level climbing plus the top-level walk.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeBoundReport {
    pub drift_bound: f64,
    pub top_level_walk_bound: f64,
    pub total: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub walk_constant: f64,
}

/// Combines [`variable_drift_bound`] with the top-level walk term
/// `walk_constant * n^(gamma + lambda)`. The exponents are design metadata;
/// nothing enforces them at a fixed `n`.
pub fn total_runtime_bound(
    table: &DriftLevelTable,
    start_distance: usize,
    n: usize,
    gamma: f64,
    lambda: f64,
    walk_constant: f64,
) -> Result<RuntimeBoundReport, DriftError> {
    if n == 0 {
        return Err(DriftError::Domain {
            what: "n = 0".into(),
        });
    }
    if gamma < 0.0 || lambda < 0.0 || walk_constant < 0.0 {
        return Err(DriftError::Domain {
            what: format!("gamma = {gamma}, lambda = {lambda}, constant = {walk_constant} must be nonnegative"),
        });
    }
    let drift_bound = variable_drift_bound(table, start_distance)?;
    let top_level_walk_bound = walk_constant * (n as f64).powf(gamma + lambda);
    Ok(RuntimeBoundReport {
        drift_bound,
        top_level_walk_bound,
        total: drift_bound + top_level_walk_bound,
        gamma,
        lambda,
        walk_constant,
    })
}

/// A finite Markov chain with a target set and integer distances.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    transitions: Vec<Vec<f64>>,
    targets: Vec<bool>,
    distances: Vec<u64>,
}

/// Row sums must match 1 within this slack.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

impl ChainSpec {
    /// Validates stochasticity and the distance contract (`D = 0` exactly on
    /// the target set). Without explicit distances the minimal number of
    /// steps to the target set is used, which also proves reachability.
    pub fn new(
        transitions: Vec<Vec<f64>>,
        target_states: &[usize],
        distances: Option<Vec<u64>>,
    ) -> Result<Self, DriftError> {
        let n = transitions.len();
        if n == 0 {
            return Err(DriftError::Domain {
                what: "chain has no states".into(),
            });
        }
        if n > STATE_LIMIT {
            return Err(DriftError::StateLimitExceeded {
                states: n,
                limit: STATE_LIMIT,
            });
        }
        for (state, row) in transitions.iter().enumerate() {
            if row.len() != n {
                return Err(DriftError::Domain {
                    what: format!("row {state} has {} entries, expected {n}", row.len()),
                });
            }
            if row.iter().any(|&p| p < 0.0 || p.is_nan()) {
                return Err(DriftError::NegativeTransition { state });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(DriftError::RowSumInvalid { state, sum });
            }
        }
        let mut targets = vec![false; n];
        for &t in target_states {
            if t >= n {
                return Err(DriftError::Domain {
                    what: format!("target state {t} out of range"),
                });
            }
            targets[t] = true;
        }
        if !targets.iter().any(|&t| t) {
            return Err(DriftError::Domain {
                what: "target set is empty".into(),
            });
        }
        let distances = match distances {
            Some(d) => {
                if d.len() != n {
                    return Err(DriftError::DistanceMismatch {
                        what: format!("{} distances for {n} states", d.len()),
                    });
                }
                for (state, (&dist, &target)) in d.iter().zip(&targets).enumerate() {
                    if (dist == 0) != target {
                        return Err(DriftError::DistanceMismatch {
                            what: format!(
                                "state {state}: distance {dist} with target = {target}",
                            ),
                        });
                    }
                }
                d
            }
            None => hop_distances(&transitions, &targets)?,
        };
        Ok(ChainSpec {
            transitions,
            targets,
            distances,
        })
    }

    pub fn states(&self) -> usize {
        self.transitions.len()
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    pub fn is_target(&self, state: usize) -> bool {
        self.targets[state]
    }

    pub fn distance(&self, state: usize) -> u64 {
        self.distances[state]
    }

    /// Parses the plain-text format: one probability row per line, then a
    /// `target: i j ...` line, then an optional `distance: d0 d1 ...` line.
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, DriftError> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut targets: Option<Vec<usize>> = None;
        let mut distances: Option<Vec<u64>> = None;
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("target:") {
                let parsed: Result<Vec<usize>, _> =
                    rest.split_whitespace().map(str::parse).collect();
                targets = Some(parsed.map_err(|_| DriftError::Parse {
                    line: line_no + 1,
                    message: "invalid target list".into(),
                })?);
            } else if let Some(rest) = line.strip_prefix("distance:") {
                let parsed: Result<Vec<u64>, _> =
                    rest.split_whitespace().map(str::parse).collect();
                distances = Some(parsed.map_err(|_| DriftError::Parse {
                    line: line_no + 1,
                    message: "invalid distance list".into(),
                })?);
            } else {
                let parsed: Result<Vec<f64>, _> =
                    line.split_whitespace().map(str::parse).collect();
                rows.push(parsed.map_err(|_| DriftError::Parse {
                    line: line_no + 1,
                    message: "invalid probability row".into(),
                })?);
            }
        }
        let targets = targets.ok_or(DriftError::Parse {
            line: 0,
            message: "missing target: line".into(),
        })?;
        ChainSpec::new(rows, &targets, distances)
    }
}

/// Minimal step counts to the target set (reverse BFS); errors when some
/// state cannot reach it at all.
fn hop_distances(transitions: &[Vec<f64>], targets: &[bool]) -> Result<Vec<u64>, DriftError> {
    let n = transitions.len();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (from, row) in transitions.iter().enumerate() {
        for (to, &p) in row.iter().enumerate() {
            if p > 0.0 {
                incoming[to].push(from);
            }
        }
    }
    let mut dist = vec![u64::MAX; n];
    let mut queue = VecDeque::new();
    for (state, &target) in targets.iter().enumerate() {
        if target {
            dist[state] = 0;
            queue.push_back(state);
        }
    }
    while let Some(state) = queue.pop_front() {
        for &from in &incoming[state] {
            if dist[from] == u64::MAX {
                dist[from] = dist[state] + 1;
                queue.push_back(from);
            }
        }
    }
    if let Some(state) = dist.iter().position(|&d| d == u64::MAX) {
        return Err(DriftError::UnreachableTarget { state });
    }
    Ok(dist)
}

/// The per-distance drift floors certified by the transition matrix:
/// `l_k = min { D(x) - E[D(next) | x] : x outside the target, D(x) >= k }`
/// for `k = 1..=max D`. Errors when any floor fails to be positive.
pub fn chain_level_drift(chain: &ChainSpec) -> Result<Vec<f64>, DriftError> {
    let n = chain.states();
    let max_distance = (0..n).map(|s| chain.distance(s)).max().unwrap_or(0) as usize;
    let mut floors = vec![f64::INFINITY; max_distance + 1];
    for state in 0..n {
        if chain.is_target(state) {
            continue;
        }
        let expected_next: f64 = chain.transitions()[state]
            .iter()
            .enumerate()
            .map(|(next, &p)| p * chain.distance(next) as f64)
            .sum();
        let drift = chain.distance(state) as f64 - expected_next;
        let d = chain.distance(state) as usize;
        for floor in floors.iter_mut().take(d + 1).skip(1) {
            if drift < *floor {
                *floor = drift;
            }
        }
    }
    let levels: Vec<f64> = floors[1..].to_vec();
    for (k, &l) in levels.iter().enumerate() {
        if l.is_nan() || l <= 0.0 {
            return Err(DriftError::DriftConditionViolated {
                level: k + 1,
                value: l,
            });
        }
    }
    Ok(levels)
}

/// Expected-time bound from the certified drift floors: the sum of `1 / l_k`
/// for `k = 1..=D(start)`. Zero when the start is already in the target set.
pub fn chain_drift_time_bound(chain: &ChainSpec, start: usize) -> Result<f64, DriftError> {
    if start >= chain.states() {
        return Err(DriftError::Domain {
            what: format!("start state {start} out of range"),
        });
    }
    let levels = chain_level_drift(chain)?;
    let d = chain.distance(start) as usize;
    if d == 0 {
        return Ok(0.0);
    }
    Ok(levels[..d].iter().map(|l| 1.0 / l).sum())
}

/// Exact expected hitting times of the target set from every state, by a
/// dense linear solve with partial pivoting. The residual is checked to
/// `1e-9`; unreachable targets are rejected up front.
pub fn exact_expected_hitting_time(chain: &ChainSpec) -> Result<Vec<f64>, DriftError> {
    let n = chain.states();
    // Reachability guard: absorbing non-target states make the system
    // singular (or the times infinite).
    hop_distances(chain.transitions(), {
        let targets: Vec<bool> = (0..n).map(|s| chain.is_target(s)).collect();
        &targets.clone()
    })?;

    let free: Vec<usize> = (0..n).filter(|&s| !chain.is_target(s)).collect();
    let index_of: std::collections::HashMap<usize, usize> = free
        .iter()
        .enumerate()
        .map(|(row, &state)| (state, row))
        .collect();
    let s = free.len();
    let mut matrix = vec![vec![0.0f64; s]; s];
    let mut rhs = vec![1.0f64; s];
    for (row, &state) in free.iter().enumerate() {
        matrix[row][row] += 1.0;
        for (next, &p) in chain.transitions()[state].iter().enumerate() {
            if let Some(&col) = index_of.get(&next) {
                matrix[row][col] -= p;
            }
        }
    }
    let original = matrix.clone();
    let original_rhs = rhs.clone();

    // Gaussian elimination with partial pivoting.
    for col in 0..s {
        let pivot = (col..s)
            .max_by(|&a, &b| {
                matrix[a][col]
                    .abs()
                    .partial_cmp(&matrix[b][col].abs())
                    .unwrap()
            })
            .unwrap();
        if matrix[pivot][col].abs() < 1e-14 {
            return Err(DriftError::NumericalFailure { residual: f64::MAX });
        }
        matrix.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..s {
            let factor = matrix[row][col] / matrix[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..s {
                matrix[row][k] -= factor * matrix[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut solution = vec![0.0f64; s];
    for row in (0..s).rev() {
        let mut value = rhs[row];
        for col in row + 1..s {
            value -= matrix[row][col] * solution[col];
        }
        solution[row] = value / matrix[row][row];
    }

    let mut residual = 0.0f64;
    for row in 0..s {
        let lhs: f64 = (0..s).map(|col| original[row][col] * solution[col]).sum();
        residual = residual.max((lhs - original_rhs[row]).abs());
    }
    if residual > 1e-9 {
        return Err(DriftError::NumericalFailure { residual });
    }

    let mut times = vec![0.0f64; n];
    for (row, &state) in free.iter().enumerate() {
        times[state] = solution[row];
    }
    Ok(times)
}

/// Aggregate over the hits of one kind across traces.
#[derive(Debug, Clone, PartialEq)]
pub struct HitStats {
    pub hits: usize,
    pub misses: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<usize>,
}

fn summarize(values: &[usize], total: usize) -> HitStats {
    if values.is_empty() {
        return HitStats {
            hits: 0,
            misses: total,
            mean: None,
            median: None,
            max: None,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mean = sorted.iter().sum::<usize>() as f64 / sorted.len() as f64;
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2] as f64
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) as f64 / 2.0
    };
    HitStats {
        hits: sorted.len(),
        misses: total - sorted.len(),
        mean: Some(mean),
        median: Some(median),
        max: sorted.last().copied(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalHittingTimes {
    pub top_level: HitStats,
    pub satisfactory: HitStats,
}

/// First-hit summaries (top auxiliary level, satisfactory member) over a
/// collection of run traces; runs that never hit are counted as misses.
pub fn measure_empirical_hitting_times<O>(
    traces: &[RunTrace<O>],
) -> Result<EmpiricalHittingTimes, DriftError> {
    if traces.is_empty() {
        return Err(DriftError::NoTraces);
    }
    let top: Vec<usize> = traces.iter().filter_map(|t| t.first_top_level).collect();
    let sat: Vec<usize> = traces.iter().filter_map(|t| t.first_satisfactory).collect();
    Ok(EmpiricalHittingTimes {
        top_level: summarize(&top, traces.len()),
        satisfactory: summarize(&sat, traces.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(p: f64, levels: usize) -> ChainSpec {
        // State k sits at distance k; improvement moves one level down.
        let n = levels + 1;
        let mut rows = vec![vec![0.0; n]; n];
        rows[0][0] = 1.0;
        for k in 1..n {
            rows[k][k - 1] = p;
            rows[k][k] = 1.0 - p;
        }
        ChainSpec::new(rows, &[0], None).unwrap()
    }

    #[test]
    fn level_bound_peak_values() {
        let bound = level_improvement_bound(2, 1.0, 1.0).unwrap();
        assert!((bound.variable - 0.75).abs() < 1e-15);
        assert!((bound.constant - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(bound.variable >= bound.constant);
    }

    #[test]
    fn level_bound_rejects_degenerate_probabilities() {
        assert!(matches!(
            level_improvement_bound(4, 0.0, 1.0),
            Err(DriftError::DegenerateDesign { .. })
        ));
        assert!(matches!(
            level_improvement_bound(1, 0.5, 1.0),
            Err(DriftError::Domain { .. })
        ));
    }

    #[test]
    fn level_bound_decreases_towards_its_limit() {
        let mut previous = f64::INFINITY;
        let limit = 1.0 - (-1.0f64).exp();
        for m in [2usize, 3, 5, 10, 100, 10_000] {
            let bound = level_improvement_bound(m, 0.5, 0.8).unwrap();
            assert!(bound.variable < previous);
            assert!(bound.variable > bound.constant);
            previous = bound.variable;
        }
        let large = level_improvement_bound(10_000_000, 0.5, 0.8).unwrap();
        assert!((large.variable - limit * 0.4).abs() < 1e-7);
    }

    #[test]
    fn zero_start_distance_means_no_climbing() {
        let table = DriftLevelTable::new(vec![0.5, 0.25], 2).unwrap();
        assert_eq!(variable_drift_bound(&table, 0).unwrap(), 0.0);
    }

    #[test]
    fn four_level_design_table_bound() {
        // l_k = (3/4) / (4 - k) for k = 0..3; climbing all four levels costs
        // sum of (4 - k) * 4/3 = (4 + 3 + 2 + 1) * 4/3 = 40/3.
        let table = crate::scheduling::level_drift_table(4, 2);
        for (k, &l) in table.levels().iter().enumerate() {
            assert!((l - 0.75 / (4 - k) as f64).abs() < 1e-15);
        }
        let bound = variable_drift_bound(&table, 4).unwrap();
        assert!((bound - 40.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_levels_give_distance_over_drift() {
        let table = DriftLevelTable::new(vec![0.2; 7], 3).unwrap();
        for d in 0..=7usize {
            let bound = variable_drift_bound(&table, d).unwrap();
            assert!((bound - d as f64 / 0.2).abs() < 1e-12);
        }
        assert!(matches!(
            variable_drift_bound(&table, 8),
            Err(DriftError::StartDistanceTooLarge { .. })
        ));
    }

    #[test]
    fn drift_bound_splits_additively() {
        let table =
            DriftLevelTable::new(vec![0.9, 0.5, 0.4, 0.25, 0.8, 0.1, 0.6, 0.35], 4).unwrap();
        let m_top = table.top_level();
        for a in 0..=m_top {
            for b in 0..=(m_top - a) {
                let whole = variable_drift_bound(&table, a + b).unwrap();
                let near_top = variable_drift_bound(&table, b).unwrap();
                let deep: f64 = table.levels()[m_top - a - b..m_top - b]
                    .iter()
                    .map(|l| 1.0 / l)
                    .sum();
                assert!((whole - (near_top + deep)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn runtime_report_composes_drift_and_walk() {
        let table = DriftLevelTable::new(vec![1.0; 5], 2).unwrap();
        let report = total_runtime_bound(&table, 5, 8, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(report.drift_bound, 5.0);
        assert_eq!(report.top_level_walk_bound, 1.0);
        assert_eq!(report.total, 6.0);

        let report = total_runtime_bound(&table, 5, 8, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(report.top_level_walk_bound, 512.0);
        assert_eq!(report.total, report.drift_bound + 512.0);
    }

    #[test]
    fn geometric_two_state_chain() {
        let chain = ChainSpec::new(
            vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            &[0],
            None,
        )
        .unwrap();
        let times = exact_expected_hitting_time(&chain).unwrap();
        assert_eq!(times[0], 0.0);
        assert!((times[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ladder_bound_is_tight() {
        let chain = ladder(0.5, 2);
        let times = exact_expected_hitting_time(&chain).unwrap();
        assert!((times[2] - 4.0).abs() < 1e-9);
        let levels = chain_level_drift(&chain).unwrap();
        assert_eq!(levels.len(), 2);
        assert!((levels[0] - 0.5).abs() < 1e-12);
        assert!((levels[1] - 0.5).abs() < 1e-12);
        let bound = chain_drift_time_bound(&chain, 2).unwrap();
        assert!((bound - 4.0).abs() < 1e-9);
    }

    #[test]
    fn drift_bound_dominates_on_a_skipping_chain() {
        // A chain that can jump two levels at once still satisfies the
        // per-level condition; the bound must stay above the exact time.
        let chain = ChainSpec::new(
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.4, 0.6, 0.0],
                vec![0.3, 0.3, 0.4],
            ],
            &[0],
            None,
        )
        .unwrap();
        let times = exact_expected_hitting_time(&chain).unwrap();
        for state in 0..3 {
            let bound = chain_drift_time_bound(&chain, state).unwrap();
            assert!(bound >= times[state] - 1e-9, "state {state}");
        }
    }

    #[test]
    fn absorbing_non_target_state_is_rejected() {
        let chain = ChainSpec::new(
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.5, 0.5, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            &[0],
            Some(vec![0, 1, 2]),
        )
        .unwrap();
        assert!(matches!(
            exact_expected_hitting_time(&chain),
            Err(DriftError::UnreachableTarget { state: 2 })
        ));
    }

    #[test]
    fn construction_validates_rows_and_distances() {
        assert!(matches!(
            ChainSpec::new(vec![vec![0.5, 0.4], vec![0.0, 1.0]], &[1], None),
            Err(DriftError::RowSumInvalid { state: 0, .. })
        ));
        assert!(matches!(
            ChainSpec::new(vec![vec![1.5, -0.5], vec![0.0, 1.0]], &[1], None),
            Err(DriftError::NegativeTransition { state: 0 })
        ));
        // Distance zero off the target set is inconsistent.
        assert!(matches!(
            ChainSpec::new(
                vec![vec![1.0, 0.0], vec![0.5, 0.5]],
                &[0],
                Some(vec![0, 0])
            ),
            Err(DriftError::DistanceMismatch { .. })
        ));
        // Unreachable target surfaces at construction when distances default.
        assert!(matches!(
            ChainSpec::new(
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                &[0],
                None
            ),
            Err(DriftError::UnreachableTarget { state: 1 })
        ));
    }

    #[test]
    fn chain_file_round_trip() {
        let text = "\
# three-state ladder
0.5 0.5 0\n0 0.5 0.5\n0 0 1\ntarget: 2\ndistance: 2 1 0\n";
        let chain = ChainSpec::parse(text).unwrap();
        assert_eq!(chain.states(), 3);
        assert!(chain.is_target(2));
        assert_eq!(chain.distance(0), 2);
        let times = exact_expected_hitting_time(&chain).unwrap();
        assert!((times[0] - 4.0).abs() < 1e-9);
        assert!((times[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn chain_parse_needs_targets() {
        assert!(matches!(
            ChainSpec::parse("1.0\n"),
            Err(DriftError::Parse { .. })
        ));
    }

    #[test]
    fn empirical_summaries() {
        fn trace(top: Option<usize>, sat: Option<usize>) -> RunTrace<i64> {
            RunTrace {
                seed: 0,
                records: Vec::new(),
                first_top_level: top,
                first_satisfactory: sat,
            }
        }
        let single = [trace(Some(3), Some(3))];
        let stats = measure_empirical_hitting_times(&single).unwrap();
        assert_eq!(stats.top_level.mean, Some(3.0));
        assert_eq!(stats.top_level.median, Some(3.0));
        assert_eq!(stats.top_level.max, Some(3));

        let pair = [trace(Some(2), None), trace(Some(4), Some(1))];
        let stats = measure_empirical_hitting_times(&pair).unwrap();
        assert_eq!(stats.top_level.mean, Some(3.0));
        assert_eq!(stats.top_level.hits, 2);
        assert_eq!(stats.satisfactory.hits, 1);
        assert_eq!(stats.satisfactory.misses, 1);

        assert!(matches!(
            measure_empirical_hitting_times::<i64>(&[]),
            Err(DriftError::NoTraces)
        ));
    }
}
