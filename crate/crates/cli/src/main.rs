//! Command-line harness: instance generation, experiment runs, bound
//! calculators, and oracle cross-checks.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use schedrift::drift_bounds::{
    chain_drift_time_bound, chain_level_drift, exact_expected_hitting_time, total_runtime_bound,
    ChainSpec,
};
use schedrift::engine::{Individual, Population};
use schedrift::exact_solver::optimum_lateness;
use schedrift::harness::{
    generate_instance, run_experiment, write_outputs, BudgetSpec, ExperimentConfig,
    GeneratorParams,
};
use schedrift::scheduling::{
    jackson_strategy, level_drift_table, level_schema, SchedulingInstance, SchedulingProblem,
};
use schedrift::schema_bounds::{
    after_mutation_tail_bound, average_success_probability, chernoff_count_bounds,
    exact_count_distribution, expected_count_lower_bound, monte_carlo_count_distribution,
    CountStage, SchemaBoundInput,
};
use schedrift::time::{parse_time, time_to_f64, Time};

#[derive(Parser)]
#[command(
    name = "schedrift",
    about = "Level-guided evolutionary search for single-machine scheduling, with bound calculators and brute-force oracles",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random instance file.
    Generate(GenerateArgs),
    /// Run a configured experiment and write its report files.
    Run(RunArgs),
    /// Print the probability and runtime bounds for given parameters.
    Bounds(BoundsArgs),
    /// Brute-force cross-checks: exact optimum, hitting times, schema counts.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

fn parse_range(text: &str) -> Result<RangeArg, String> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got {text:?}"))?;
    let lo = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi = hi.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(RangeArg { lo, hi })
}

#[derive(Clone, Copy)]
struct RangeArg {
    lo: u64,
    hi: u64,
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of jobs.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Release-time range, inclusive.
    #[arg(long, value_parser = parse_range, default_value = "0..20")]
    release: RangeArg,
    /// Processing-time range, inclusive.
    #[arg(long, value_parser = parse_range, default_value = "1..10")]
    processing: RangeArg,
    /// Delivery-time range, inclusive.
    #[arg(long, value_parser = parse_range, default_value = "0..20")]
    delivery: RangeArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's approximation parameter.
    #[arg(long)]
    eps: Option<String>,
    /// Override the config's population size.
    #[arg(long = "pop-size")]
    pop_size: Option<usize>,
    /// Override the config's budget (a number, or "auto").
    #[arg(long)]
    budget: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero when any verification assertion fails.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Population size.
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Instance size for the drift table and walk bound.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Approximation parameter (decimal rational).
    #[arg(long, default_value = "1")]
    eps: String,
    /// Averaged per-position success probability.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Slack for the count tail bounds.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Slack for the recombination-count window.
    #[arg(long, default_value_t = 0.5)]
    slack: f64,
    /// Minimal probability that mutation preserves membership.
    #[arg(long = "pr-preserve", default_value_t = 1.0)]
    pr_preserve: f64,
    /// Minimal probability that mutation creates membership.
    #[arg(long = "pr-create", default_value_t = 0.0)]
    pr_create: f64,
    /// Constant factor on the top-level walk term.
    #[arg(long = "walk-constant", default_value_t = 1.0)]
    walk_constant: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StageArg {
    /// Recombination only.
    Rec,
    /// Mutation applied to the given population.
    Mut,
    /// Recombination followed by mutation.
    Full,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exact optimal lateness by pruned exhaustive search.
    Exact {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Exact expected hitting times of a chain file, next to the drift bound.
    HittingTime {
        #[arg(long)]
        chain: PathBuf,
    },
    /// Exact schema-count distribution on a seeded random population.
    CountDistribution {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "1")]
        eps: String,
        #[arg(long = "pop-size", default_value_t = 3)]
        pop_size: usize,
        /// Schema level; defaults to one above the population's best level.
        #[arg(long)]
        level: Option<usize>,
        #[arg(long, value_enum, default_value_t = StageArg::Rec)]
        stage: StageArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also print a Monte Carlo estimate with this many samples.
        #[arg(long)]
        samples: Option<u64>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Run(args) => run(args),
        Command::Bounds(args) => bounds(args),
        Command::Oracle { which } => oracle(which),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let params = GeneratorParams {
        n: args.n,
        release: [args.release.lo, args.release.hi],
        processing: [args.processing.lo, args.processing.hi],
        delivery: [args.delivery.lo, args.delivery.hi],
    };
    let instance = generate_instance(&params, args.seed)?;
    let text = instance.to_text();
    match args.out {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {} ({} jobs, seed {})", path.display(), args.n, args.seed);
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }
    if let Some(eps) = args.eps {
        config.eps = eps;
    }
    if let Some(pop_size) = args.pop_size {
        config.pop_size = pop_size;
    }
    if let Some(budget) = args.budget {
        config.budget = match budget.parse::<u64>() {
            Ok(value) => BudgetSpec::Fixed(value),
            Err(_) => BudgetSpec::Named(budget),
        };
    }
    if let Some(out) = args.out {
        config.out_dir = Some(out);
    }
    config.validate()?;

    let output = run_experiment(&config)?;
    let report = &output.report;
    println!(
        "n = {}, m = {}, eps = {}, budget = {}, runs = {}",
        report.n, report.pop_size, report.eps, report.resolved_budget, report.runs
    );
    println!(
        "success rate {:.3}; mean first top-level hit {}; drift bound {:.2}; walk bound {:.2}",
        report.success_rate,
        report
            .mean_first_top_level
            .map_or("-".into(), |v| format!("{v:.2}")),
        report.drift_sum,
        report.walk_bound
    );
    if report.ratio_columns_omitted {
        println!("note: instance above the exact-solver limit; ratio columns omitted");
    }
    if let Some(dir) = &config.out_dir {
        let (csv, summary) = write_outputs(&output, dir)?;
        println!("wrote {} and {}", csv.display(), summary.display());
    } else {
        print!("{}", output.csv_body);
    }
    if args.verify {
        if output.violations.is_empty() {
            println!("verify: all assertions hold");
        } else {
            for violation in &output.violations {
                eprintln!("verify: {violation}");
            }
            bail!("{} verification assertion(s) failed", output.violations.len());
        }
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let eps: Time = parse_time(&args.eps).map_err(|e| anyhow::anyhow!("--eps: {e}"))?;
    if eps <= Time::from_integer(0) {
        bail!("--eps must be positive");
    }

    let (below, above) = chernoff_count_bounds(args.p, args.m, args.delta)?;
    println!("count tail bounds (m = {}, p = {}, delta = {}):", args.m, args.p, args.delta);
    println!("  Pr(count < (1-delta) m p) <= {below:.6}");
    println!("  Pr(count > (1+delta) m p) <= {above:.6}");

    let input = SchemaBoundInput {
        m: args.m,
        p_avg: args.p,
        pr_preserve: args.pr_preserve,
        pr_create: args.pr_create,
        delta: args.delta,
        eps: args.slack,
        alpha: 1.0,
        beta: 1.0,
        count_s0: 1,
    };
    let mu = expected_count_lower_bound(&input)?;
    let tail = after_mutation_tail_bound(&input)?;
    println!(
        "after-mutation bounds (slack = {}, preserve = {}, create = {}):",
        args.slack, args.pr_preserve, args.pr_create
    );
    println!("  expected-count lower bound = {mu:.6}");
    println!("  Pr(count >= (1-delta) bound) >= {tail:.6}");

    let table = level_drift_table(args.n, args.m);
    println!("level drift table (n = {}, m = {}):", args.n, args.m);
    println!("  level  l_k(m)      1/l_k(m)");
    for (k, &l) in table.levels().iter().enumerate() {
        println!("  {k:<5}  {l:<10.6}  {:.4}", 1.0 / l);
    }
    let eps_f = time_to_f64(eps);
    let report = total_runtime_bound(&table, args.n, args.n, 2.0, eps_f.recip(), args.walk_constant)?;
    println!(
        "drift sum = {:.4}; walk bound = {} * n^(2 + 1/eps) = {:.4}; total = {:.4}",
        report.drift_bound, args.walk_constant, report.top_level_walk_bound, report.total
    );
    Ok(())
}

fn oracle(which: OracleCommand) -> Result<()> {
    match which {
        OracleCommand::Exact { instance, limit } => {
            let text = std::fs::read_to_string(&instance)
                .with_context(|| format!("reading {}", instance.display()))?;
            let instance = SchedulingInstance::parse(&text)?;
            let result = optimum_lateness(&instance, limit)?;
            println!(
                "optimum lateness = {}",
                schedrift::time::format_time(result.optimum)
            );
            let witness: Vec<String> = result.witness.iter().map(|j| (j + 1).to_string()).collect();
            println!("witness order (jobs numbered from 1): {}", witness.join(" "));
            println!("search nodes: {}", result.nodes_explored);
            Ok(())
        }
        OracleCommand::HittingTime { chain } => {
            let text = std::fs::read_to_string(&chain)
                .with_context(|| format!("reading {}", chain.display()))?;
            let chain = ChainSpec::parse(&text)?;
            let times = exact_expected_hitting_time(&chain)?;
            match chain_level_drift(&chain) {
                Ok(levels) => {
                    println!("certified drift floors (per distance level):");
                    for (k, l) in levels.iter().enumerate() {
                        println!("  distance {}: {l:.6}", k + 1);
                    }
                    println!("state  distance  exact-expected  drift-bound");
                    for state in 0..chain.states() {
                        let bound = chain_drift_time_bound(&chain, state)?;
                        println!(
                            "  {state:<4} {:<9} {:<15.6} {bound:.6}",
                            chain.distance(state),
                            times[state]
                        );
                    }
                }
                Err(err) => {
                    println!("drift condition not certified: {err}");
                    println!("state  distance  exact-expected");
                    for state in 0..chain.states() {
                        println!(
                            "  {state:<4} {:<9} {:.6}",
                            chain.distance(state),
                            times[state]
                        );
                    }
                }
            }
            Ok(())
        }
        OracleCommand::CountDistribution {
            instance,
            eps,
            pop_size,
            level,
            stage,
            seed,
            samples,
        } => {
            let text = std::fs::read_to_string(&instance)
                .with_context(|| format!("reading {}", instance.display()))?;
            let instance = SchedulingInstance::parse(&text)?;
            let eps: Time = parse_time(&eps).map_err(|e| anyhow::anyhow!("--eps: {e}"))?;
            let problem = SchedulingProblem::new(instance, eps)?;
            let n = problem.instance().n();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let members: Vec<Individual<SchedulingProblem>> = (0..pop_size)
                .map(|_| {
                    let mut order: Vec<usize> = (0..n).collect();
                    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
                    Individual::evaluate(&problem, order)
                })
                .collect();
            let population = Population::new(members, 0)?;
            let q = level.unwrap_or_else(|| (population.aux_max() + 1).min(n));
            let schema = level_schema(&problem, q);
            let strategy = jackson_strategy(&problem);
            let stage = match stage {
                StageArg::Rec => CountStage::Recombination,
                StageArg::Mut => CountStage::MutationOnly,
                StageArg::Full => CountStage::RecombinationThenMutation,
            };
            let dist = exact_count_distribution(&schema, &strategy, &population, &problem, stage)?;
            println!(
                "schema {} on a population of {} (best level {}):",
                schema.label(),
                pop_size,
                population.aux_max()
            );
            let averaged = average_success_probability(
                &schema,
                &strategy,
                &population,
                strategy.pair_sampling,
            )?;
            println!("averaged pair success probability = {averaged:.9}");
            println!("per-position success: {:?}", dist.per_position());
            println!("count  exact-probability");
            for (k, p) in dist.probs().iter().enumerate() {
                println!("  {k:<4} {p:.9}");
            }
            println!("mean = {:.9}", dist.mean());
            if let Some(samples) = samples {
                let mut mc_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                let mc = monte_carlo_count_distribution(
                    &schema, &strategy, &population, &problem, stage, samples, &mut mc_rng,
                )?;
                let worst = dist
                    .probs()
                    .iter()
                    .zip(mc.probs())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                println!("monte carlo ({samples} samples): {:?}", mc.probs());
                println!("largest deviation from exact = {worst:.6}");
            }
            Ok(())
        }
    }
}
