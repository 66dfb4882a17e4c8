//! Experiment orchestration: seeded instance generation, configured EA runs,
//! and reproducible report files.
//!
//! A config names an instance source (a file, or generator parameters), the
//! approximation parameter, the population size, a seed list, and a stopping
//! mode. Each seed becomes one run row; the report carries the measured
//! hitting times next to the theoretical bound columns so the two can be
//! compared directly. Report bodies are byte-identical across reruns of the
//! same config; the only impure line is an explicitly marked timestamp
//! header in the CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift_bounds::{
    measure_empirical_hitting_times, variable_drift_bound, DriftError, EmpiricalHittingTimes,
};
use crate::engine::{run, EngineError, Individual, Population, RunTrace, StopRule};
use crate::exact_solver::{optimum_lateness, SolverError};
use crate::scheduling::{
    jackson_strategy, level_drift_table, SchedulingError, SchedulingInstance, SchedulingProblem,
};
use crate::time::{format_time, parse_time, time_to_f64, Time};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {what}")]
    Config { what: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Scheduling(#[from] SchedulingError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Inclusive integer ranges for the three job fields.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GeneratorParams {
    pub n: usize,
    pub release: [u64; 2],
    pub processing: [u64; 2],
    pub delivery: [u64; 2],
}

impl GeneratorParams {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.n == 0 {
            return Err(HarnessError::Config {
                what: "generator needs n >= 1".into(),
            });
        }
        for (name, range) in [
            ("release", self.release),
            ("processing", self.processing),
            ("delivery", self.delivery),
        ] {
            if range[0] > range[1] {
                return Err(HarnessError::Config {
                    what: format!("{name} range [{}, {}] is empty", range[0], range[1]),
                });
            }
            if range[1] > 1_000_000_000 {
                return Err(HarnessError::Config {
                    what: format!("{name} range exceeds 1e9"),
                });
            }
        }
        Ok(())
    }
}

/// Deterministic instance from a seed: for each job in order, draw release,
/// processing, delivery uniformly from the configured inclusive ranges.
pub fn generate_instance(
    params: &GeneratorParams,
    seed: u64,
) -> Result<SchedulingInstance, HarnessError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let draw = |rng: &mut ChaCha8Rng, range: [u64; 2]| -> i64 {
            rand::Rng::random_range(rng, range[0]..=range[1]) as i64
        };
        let r = draw(&mut rng, params.release);
        let p = draw(&mut rng, params.processing);
        let q = draw(&mut rng, params.delivery);
        triples.push((r, p, q));
    }
    Ok(SchedulingInstance::from_integers(&triples)?)
}

/// Where each run's instance comes from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum InstanceSource {
    /// A fixed instance file; every seed runs on the same instance.
    File { file: PathBuf },
    /// Generator parameters; each seed generates its own instance.
    Generator(GeneratorParams),
}

/// Generation budget: a fixed count, or `"auto"` for
/// `budget_factor * (drift bound + walk bound)` rounded up.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum BudgetSpec {
    Fixed(u64),
    Named(String),
}

impl Default for BudgetSpec {
    fn default() -> Self {
        BudgetSpec::Named("auto".into())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum StopMode {
    /// Stop at the first member within the approximation threshold.
    #[default]
    Verified,
    /// Run the full budget; hits are still recorded.
    Budget,
}

/// Which built-in strategy drives the runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StrategySelector {
    /// Level-guided operators, ordered pairs without replacement.
    #[default]
    Jackson,
    /// Same operators with pair sampling with replacement.
    JacksonWithReplacement,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct VerifySettings {
    /// Fail verification below this fraction of satisfied runs.
    pub min_success_rate: Option<f64>,
    /// Require the mean first top-level hit to stay within the drift bound.
    #[serde(default)]
    pub mean_hit_within_drift_bound: bool,
}

fn default_budget_factor() -> f64 {
    10.0
}

fn default_exact_limit() -> usize {
    crate::exact_solver::DEFAULT_LIMIT
}

fn default_walk_constant() -> f64 {
    1.0
}

/// One experiment: instance source, approximation parameter, population
/// size, seeds, stopping rule, and verification thresholds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    /// Decimal rational, e.g. `"0.5"`.
    pub eps: String,
    pub pop_size: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default = "default_budget_factor")]
    pub budget_factor: f64,
    #[serde(default)]
    pub stop: StopMode,
    #[serde(default = "default_exact_limit")]
    pub exact_limit: usize,
    #[serde(default = "default_walk_constant")]
    pub walk_constant: f64,
    #[serde(default)]
    pub strategy: StrategySelector,
    /// Report files land here when set (the CLI `--out` flag overrides it).
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub instance: InstanceSource,
    #[serde(default)]
    pub verify: VerifySettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let eps = parse_time(&self.eps).map_err(|e| HarnessError::Config {
            what: format!("eps: {e}"),
        })?;
        if eps <= Time::zero() {
            return Err(HarnessError::Config {
                what: format!("eps = {} must be positive", self.eps),
            });
        }
        if self.pop_size < 2 {
            return Err(HarnessError::Config {
                what: format!("pop_size = {} must be at least 2", self.pop_size),
            });
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config {
                what: "seeds list is empty".into(),
            });
        }
        if let BudgetSpec::Named(name) = &self.budget {
            if name != "auto" {
                return Err(HarnessError::Config {
                    what: format!("budget must be a number or \"auto\", got {name:?}"),
                });
            }
        }
        if let BudgetSpec::Fixed(0) = self.budget {
            // Allowed: a zero-budget run reports only the initial population.
        }
        if let InstanceSource::Generator(params) = &self.instance {
            params.validate()?;
        }
        Ok(())
    }

    pub fn eps_value(&self) -> Time {
        parse_time(&self.eps).expect("validated")
    }
}

/// One row of the report, with presentation-ready fields.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunRow {
    pub seed: u64,
    pub first_top_level: Option<usize>,
    pub first_satisfactory: Option<usize>,
    pub final_lateness: String,
    pub optimum: Option<String>,
    pub ratio: Option<f64>,
    pub satisfied: bool,
}

/// Aggregates plus the theoretical bound columns.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExperimentReport {
    pub eps: String,
    pub pop_size: usize,
    pub n: usize,
    pub stop: StopMode,
    pub resolved_budget: u64,
    pub runs: usize,
    pub success_rate: f64,
    pub mean_first_top_level: Option<f64>,
    pub median_first_top_level: Option<f64>,
    pub mean_first_satisfactory: Option<f64>,
    pub top_level_misses: usize,
    /// Sum of reciprocal per-level improvement bounds for this n and m.
    pub drift_sum: f64,
    /// `walk_constant * n^(2 + 1/eps)`.
    pub walk_bound: f64,
    pub total_bound: f64,
    pub ratio_columns_omitted: bool,
    pub rows: Vec<RunRow>,
}

/// Everything one experiment produces: the report, the deterministic file
/// bodies, and any verification violations.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// CSV rows without the timestamp header line.
    pub csv_body: String,
    pub summary_json: String,
    pub violations: Vec<String>,
}

struct RowData {
    seed: u64,
    trace: RunTrace<Time>,
    final_lateness: Time,
    optimum: Option<Time>,
    satisfied: bool,
}

fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Builds the initial population: `pop_size` independent uniform random
/// permutations on a dedicated stream of the seed.
pub fn initial_population(
    problem: &SchedulingProblem,
    pop_size: usize,
    seed: u64,
) -> Result<Population<SchedulingProblem>, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let members = (0..pop_size)
        .map(|_| {
            let genome = random_permutation(problem.instance().n(), &mut rng);
            Individual::evaluate(problem, genome)
        })
        .collect();
    Population::new(members, 0)
}

/// Resolves the generation budget for an instance size.
pub fn resolve_budget(config: &ExperimentConfig, n: usize) -> Result<u64, HarnessError> {
    match &config.budget {
        BudgetSpec::Fixed(value) => Ok(*value),
        BudgetSpec::Named(_) => {
            let table = level_drift_table(n, config.pop_size);
            let drift = variable_drift_bound(&table, n)?;
            let walk = walk_bound(config, n);
            Ok((config.budget_factor * (drift + walk)).ceil() as u64)
        }
    }
}

fn walk_bound(config: &ExperimentConfig, n: usize) -> f64 {
    let eps = time_to_f64(config.eps_value());
    config.walk_constant * (n as f64).powf(2.0 + eps.recip())
}

/// Runs every seed of the experiment and assembles the report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let eps = config.eps_value();

    let fixed_instance = match &config.instance {
        InstanceSource::File { file } => {
            let text = std::fs::read_to_string(file)?;
            Some(SchedulingInstance::parse(&text)?)
        }
        InstanceSource::Generator(_) => None,
    };

    let mut rows: Vec<RowData> = Vec::with_capacity(config.seeds.len());
    let mut n_seen: Option<usize> = None;
    let mut resolved_budget = 0u64;
    let mut ratio_columns_omitted = false;

    for &seed in &config.seeds {
        let instance = match (&config.instance, &fixed_instance) {
            (_, Some(instance)) => instance.clone(),
            (InstanceSource::Generator(params), None) => generate_instance(params, seed)?,
            _ => unreachable!(),
        };
        let n = instance.n();
        n_seen = Some(n_seen.map_or(n, |prev| prev.max(n)));
        resolved_budget = resolve_budget(config, n)?;

        let optimum = if n <= config.exact_limit {
            Some(optimum_lateness(&instance, config.exact_limit)?.optimum)
        } else {
            ratio_columns_omitted = true;
            None
        };
        let threshold = optimum.map(|j_star| (Time::from_integer(1) + eps) * j_star);

        let problem = SchedulingProblem::new(instance, eps)?;
        let mut strategy = jackson_strategy(&problem);
        if config.strategy == StrategySelector::JacksonWithReplacement {
            strategy.pair_sampling = crate::engine::PairSampling::WithReplacement;
        }
        let initial = initial_population(&problem, config.pop_size, seed)?;
        let instance_ref = problem.instance().clone();
        let stop = StopRule {
            budget: resolved_budget,
            satisfactory: threshold.map(|limit| {
                let instance = instance_ref.clone();
                Box::new(move |order: &Vec<usize>| {
                    crate::scheduling::evaluate_schedule(&instance, order)
                        .map(|s| s.max_lateness <= limit)
                        .unwrap_or(false)
                }) as Box<dyn Fn(&Vec<usize>) -> bool>
            }),
            stop_on_satisfactory: config.stop == StopMode::Verified,
        };
        let trace = run(initial, &strategy, &problem, &stop, seed)?;
        let final_lateness = trace
            .records
            .last()
            .expect("traces always hold the initial record")
            .best_objective;
        let satisfied = trace.first_satisfactory.is_some();
        rows.push(RowData {
            seed,
            trace,
            final_lateness,
            optimum,
            satisfied,
        });
    }

    let n = n_seen.expect("at least one seed");
    let table = level_drift_table(n, config.pop_size);
    let drift_sum = variable_drift_bound(&table, n)?;
    let walk = walk_bound(config, n);

    let traces: Vec<&RunTrace<Time>> = rows.iter().map(|r| &r.trace).collect();
    let hitting = {
        let owned: Vec<RunTrace<Time>> = traces.into_iter().cloned().collect();
        measure_empirical_hitting_times(&owned)?
    };

    let report = assemble_report(
        config,
        n,
        resolved_budget,
        drift_sum,
        walk,
        ratio_columns_omitted,
        &rows,
        &hitting,
    );
    let csv_body = render_csv(&report);
    let summary_json =
        serde_json::to_string_pretty(&report).expect("report serialization is infallible");
    let violations = verify_rows(config, &rows, &hitting, drift_sum);

    Ok(ExperimentOutput {
        report,
        csv_body,
        summary_json,
        violations,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    config: &ExperimentConfig,
    n: usize,
    resolved_budget: u64,
    drift_sum: f64,
    walk: f64,
    ratio_columns_omitted: bool,
    rows: &[RowData],
    hitting: &EmpiricalHittingTimes,
) -> ExperimentReport {
    let satisfied = rows.iter().filter(|r| r.satisfied).count();
    let report_rows: Vec<RunRow> = rows
        .iter()
        .map(|row| {
            let ratio = row.optimum.and_then(|j_star| {
                if j_star > Time::zero() {
                    Some(time_to_f64(row.final_lateness) / time_to_f64(j_star))
                } else {
                    None
                }
            });
            RunRow {
                seed: row.seed,
                first_top_level: row.trace.first_top_level,
                first_satisfactory: row.trace.first_satisfactory,
                final_lateness: format_time(row.final_lateness),
                optimum: row.optimum.map(format_time),
                ratio,
                satisfied: row.satisfied,
            }
        })
        .collect();
    ExperimentReport {
        eps: config.eps.clone(),
        pop_size: config.pop_size,
        n,
        stop: config.stop,
        resolved_budget,
        runs: rows.len(),
        success_rate: satisfied as f64 / rows.len() as f64,
        mean_first_top_level: hitting.top_level.mean,
        median_first_top_level: hitting.top_level.median,
        mean_first_satisfactory: hitting.satisfactory.mean,
        top_level_misses: hitting.top_level.misses,
        drift_sum,
        walk_bound: walk,
        total_bound: drift_sum + walk,
        ratio_columns_omitted,
        rows: report_rows,
    }
}

fn render_csv(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str("seed,first_top_level,first_satisfactory,final_lateness,optimum,ratio\n");
    for row in &report.rows {
        let top = row
            .first_top_level
            .map_or(String::new(), |v| v.to_string());
        let sat = row
            .first_satisfactory
            .map_or(String::new(), |v| v.to_string());
        let optimum = row.optimum.clone().unwrap_or_default();
        let ratio = row.ratio.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.seed, top, sat, row.final_lateness, optimum, ratio
        )
        .expect("writing to a string cannot fail");
    }
    out
}

fn verify_rows(
    config: &ExperimentConfig,
    rows: &[RowData],
    hitting: &EmpiricalHittingTimes,
    drift_sum: f64,
) -> Vec<String> {
    let mut violations = Vec::new();
    let eps = config.eps_value();
    for row in rows {
        if let Some(j_star) = row.optimum {
            if row.final_lateness < j_star {
                violations.push(format!(
                    "seed {}: final lateness {} below the optimum {}",
                    row.seed,
                    format_time(row.final_lateness),
                    format_time(j_star)
                ));
            }
            if row.satisfied {
                let threshold = (Time::from_integer(1) + eps) * j_star;
                if row.final_lateness > threshold {
                    violations.push(format!(
                        "seed {}: satisfied run ended at {} above the threshold {}",
                        row.seed,
                        format_time(row.final_lateness),
                        format_time(threshold)
                    ));
                }
            }
        }
    }
    if let Some(min_rate) = config.verify.min_success_rate {
        let rate = rows.iter().filter(|r| r.satisfied).count() as f64 / rows.len() as f64;
        if rate < min_rate {
            violations.push(format!("success rate {rate:.4} below required {min_rate:.4}"));
        }
    }
    if config.verify.mean_hit_within_drift_bound {
        if let Some(mean) = hitting.top_level.mean {
            if mean > drift_sum {
                violations.push(format!(
                    "mean first top-level hit {mean:.2} above the drift bound {drift_sum:.2}"
                ));
            }
        }
    }
    violations
}

/// Writes `report.csv` (with a marked timestamp header) and `summary.json`
/// into `dir`, creating it if needed. Returns the two paths.
pub fn write_outputs(
    output: &ExperimentOutput,
    dir: &Path,
) -> Result<(PathBuf, PathBuf), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("report.csv");
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let csv = format!("# timestamp: {stamp}\n{}", output.csv_body);
    std::fs::write(&csv_path, csv)?;
    let summary_path = dir.join("summary.json");
    std::fs::write(&summary_path, &output.summary_json)?;
    Ok((csv_path, summary_path))
}

/// Strips the marked timestamp line, leaving the deterministic body.
pub fn strip_timestamp(report_text: &str) -> String {
    report_text
        .lines()
        .filter(|line| !line.starts_with("# timestamp:"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}
