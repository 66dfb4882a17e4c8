//! Generic population-based hybrid/mixed-strategy EA loop.
//!
//! A strategy owns level-indexed recombination and mutation operator
//! families plus the rules that pick a family for a given parent or
//! individual. One generation is recombination (one offspring per position
//! from an independently sampled ordered parent pair), then mutation applied
//! independently to every position, then selection over parents and
//! offspring. Everything is deterministic given the seed.

use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Problem hooks: evaluation of genomes and the top auxiliary level.
pub trait Problem {
    type Genome: Clone + PartialEq + Hash;
    /// Objective values are minimised; ties compare equal.
    type Objective: Clone + Ord + std::fmt::Debug;

    fn aux_level(&self, genome: &Self::Genome) -> usize;
    fn objective(&self, genome: &Self::Genome) -> Self::Objective;
    /// The top auxiliary fitness level `M`.
    fn top_level(&self) -> usize;
}

/// A genome with its cached auxiliary level and objective value.
pub struct Individual<P: Problem> {
    pub genome: P::Genome,
    pub aux_level: usize,
    pub objective: P::Objective,
}

impl<P: Problem> Clone for Individual<P> {
    fn clone(&self) -> Self {
        Individual {
            genome: self.genome.clone(),
            aux_level: self.aux_level,
            objective: self.objective.clone(),
        }
    }
}

impl<P: Problem> std::fmt::Debug for Individual<P>
where
    P::Genome: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Individual")
            .field("genome", &self.genome)
            .field("aux_level", &self.aux_level)
            .field("objective", &self.objective)
            .finish()
    }
}

impl<P: Problem> Individual<P> {
    pub fn evaluate(problem: &P, genome: P::Genome) -> Self {
        let aux_level = problem.aux_level(&genome);
        let objective = problem.objective(&genome);
        Individual {
            genome,
            aux_level,
            objective,
        }
    }

    /// Caches must equal recomputation; checked in debug builds.
    pub fn debug_validate(&self, problem: &P) {
        debug_assert_eq!(self.aux_level, problem.aux_level(&self.genome));
        debug_assert_eq!(self.objective, problem.objective(&self.genome));
    }
}

pub struct Population<P: Problem> {
    members: Vec<Individual<P>>,
    generation: usize,
}

impl<P: Problem> Clone for Population<P> {
    fn clone(&self) -> Self {
        Population {
            members: self.members.clone(),
            generation: self.generation,
        }
    }
}

impl<P: Problem> std::fmt::Debug for Population<P>
where
    P::Genome: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Population")
            .field("members", &self.members)
            .field("generation", &self.generation)
            .finish()
    }
}

impl<P: Problem> Population<P> {
    /// Hybrid-elitist selection needs at least two slots, so `m >= 2`.
    pub fn new(members: Vec<Individual<P>>, generation: usize) -> Result<Self, EngineError> {
        if members.len() < 2 {
            return Err(EngineError::PopulationTooSmall {
                size: members.len(),
            });
        }
        Ok(Population {
            members,
            generation,
        })
    }

    pub fn members(&self) -> &[Individual<P>] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Highest cached auxiliary level present in the population.
    pub fn aux_max(&self) -> usize {
        self.members.iter().map(|x| x.aux_level).max().unwrap_or(0)
    }

    /// Best (lowest) objective value present in the population.
    pub fn best_objective(&self) -> P::Objective {
        self.members
            .iter()
            .map(|x| x.objective.clone())
            .min()
            .expect("population is never empty")
    }

    /// FNV-1a digest over the member genomes, for trace records.
    pub fn digest(&self) -> u64 {
        let mut hasher = Fnv1a::default();
        for member in &self.members {
            member.genome.hash(&mut hasher);
        }
        hasher.finish()
    }
}

/// How ordered parent pairs are drawn for recombination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSampling {
    WithReplacement,
    WithoutReplacement,
}

/// Which stage an error was raised in, for context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Recombination,
    Mutation,
    Selection,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Recombination => write!(f, "recombination"),
            Stage::Mutation => write!(f, "mutation"),
            Stage::Selection => write!(f, "selection"),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("population of size {size} is too small (need m >= 2)")]
    PopulationTooSmall { size: usize },
    #[error("selection requires equal sizes, got {parents} parents and {offspring} offspring")]
    SizeMismatch { parents: usize, offspring: usize },
    #[error("{stage} family distribution at position {position} sums to {sum}, not 1")]
    InvalidDistribution {
        stage: Stage,
        position: usize,
        sum: f64,
    },
    #[error("{stage} family index {family} out of range ({families} families) at position {position}")]
    FamilyIndexOutOfRange {
        stage: Stage,
        position: usize,
        family: usize,
        families: usize,
    },
}

/// A probability distribution over family indices `0..len`.
#[derive(Debug, Clone)]
pub struct IndexDistribution {
    weights: Vec<f64>,
}

/// Distributions must sum to one within this slack.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

impl IndexDistribution {
    pub fn new(weights: Vec<f64>) -> Self {
        IndexDistribution { weights }
    }

    /// All mass on a single index.
    pub fn point(index: usize, len: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[index] = 1.0;
        IndexDistribution { weights }
    }

    pub fn uniform(len: usize) -> Self {
        IndexDistribution {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn validate(&self) -> Result<(), f64> {
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE || self.weights.iter().any(|w| *w < 0.0) {
            return Err(sum);
        }
        Ok(())
    }

    /// Inverse-CDF sampling with a single uniform draw.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }
}

/// A finite, enumerable family of binary recombination operators.
///
/// Operators are addressed by index so that the schema-probability module
/// can enumerate them exactly. Within-family selection is uniform.
pub trait RecombinationOps<G>: Send + Sync {
    /// Number of operators, or `None` when the family is not enumerable.
    fn count(&self) -> Option<u64>;
    fn apply(&self, op: u64, first: &G, second: &G) -> G;
    fn sample_op(&self, rng: &mut dyn rand::RngCore) -> u64 {
        let count = self
            .count()
            .expect("non-enumerable recombination family must override sample_op");
        rng.random_range(0..count)
    }
}

/// A finite, enumerable family of unary mutation operators.
pub trait MutationOps<G>: Send + Sync {
    fn count(&self) -> Option<u64>;
    fn apply(&self, op: u64, genome: &G) -> G;
    fn sample_op(&self, rng: &mut dyn rand::RngCore) -> u64 {
        let count = self
            .count()
            .expect("non-enumerable mutation family must override sample_op");
        rng.random_range(0..count)
    }
}

/// Context handed to a family-choice rule. `subject` is the first parent of
/// a recombination pair, or the individual about to be mutated.
pub struct RuleCtx<'a, P: Problem> {
    pub population: &'a Population<P>,
    pub generation: usize,
    pub subject: &'a Individual<P>,
}

pub type FamilyChoiceRule<P> =
    Box<dyn for<'a> Fn(&RuleCtx<'a, P>) -> IndexDistribution + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Keeps one individual at the best combined auxiliary level and one at
    /// the best combined objective; fills the rest by level-then-objective
    /// truncation over parents and offspring.
    HybridElitist,
    /// Discards the offspring entirely (useful for tests and baselines).
    KeepParents,
}

/// Operator families plus the distribution rules that drive one generation.
pub struct StrategyProfile<P: Problem> {
    pub recombination_families: Vec<Box<dyn RecombinationOps<P::Genome>>>,
    pub mutation_families: Vec<Box<dyn MutationOps<P::Genome>>>,
    pub recombination_choice: FamilyChoiceRule<P>,
    pub mutation_choice: FamilyChoiceRule<P>,
    pub pair_sampling: PairSampling,
    pub selection: SelectionRule,
}

/// Draws exactly `m` ordered parent pairs, uniformly and independently.
/// Without replacement means the two indices within a pair differ; the same
/// pair may still be drawn for several positions.
pub fn sample_recombination_pairs<P: Problem>(
    population: &Population<P>,
    mode: PairSampling,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>, EngineError> {
    let m = population.size();
    if m < 2 && mode == PairSampling::WithoutReplacement {
        return Err(EngineError::PopulationTooSmall { size: m });
    }
    let mut pairs = Vec::with_capacity(m);
    for _ in 0..m {
        let first = rng.random_range(0..m);
        let second = match mode {
            PairSampling::WithReplacement => rng.random_range(0..m),
            PairSampling::WithoutReplacement => {
                let offset = rng.random_range(1..m);
                (first + offset) % m
            }
        };
        pairs.push((first, second));
    }
    Ok(pairs)
}

fn choose_family<P: Problem>(
    rule: &FamilyChoiceRule<P>,
    ctx: &RuleCtx<'_, P>,
    families: usize,
    stage: Stage,
    position: usize,
    rng: &mut impl Rng,
) -> Result<usize, EngineError> {
    let dist = rule(ctx);
    dist.validate()
        .map_err(|sum| EngineError::InvalidDistribution {
            stage,
            position,
            sum,
        })?;
    let family = dist.sample(rng);
    if family >= families {
        return Err(EngineError::FamilyIndexOutOfRange {
            stage,
            position,
            family,
            families,
        });
    }
    Ok(family)
}

/// One recombination -> mutation -> selection cycle.
///
/// Random draws happen in a fixed order (pairs, then per-position
/// recombination family and operator, then per-position mutation family and
/// operator), which is what makes seeded runs reproducible.
pub fn step_generation<P: Problem>(
    population: &Population<P>,
    strategy: &StrategyProfile<P>,
    problem: &P,
    rng: &mut impl Rng,
) -> Result<Population<P>, EngineError> {
    let m = population.size();
    let t = population.generation();
    let pairs = sample_recombination_pairs(population, strategy.pair_sampling, rng)?;

    let mut recombined: Vec<Individual<P>> = Vec::with_capacity(m);
    for (position, &(i, j)) in pairs.iter().enumerate() {
        let first = &population.members()[i];
        let second = &population.members()[j];
        first.debug_validate(problem);
        let ctx = RuleCtx {
            population,
            generation: t,
            subject: first,
        };
        let family = choose_family(
            &strategy.recombination_choice,
            &ctx,
            strategy.recombination_families.len(),
            Stage::Recombination,
            position,
            rng,
        )?;
        let ops = &strategy.recombination_families[family];
        let op = ops.sample_op(rng);
        let child = ops.apply(op, &first.genome, &second.genome);
        recombined.push(Individual::evaluate(problem, child));
    }

    let mut mutated: Vec<Individual<P>> = Vec::with_capacity(m);
    for (position, parent) in recombined.iter().enumerate() {
        let ctx = RuleCtx {
            population,
            generation: t,
            subject: parent,
        };
        let family = choose_family(
            &strategy.mutation_choice,
            &ctx,
            strategy.mutation_families.len(),
            Stage::Mutation,
            position,
            rng,
        )?;
        let ops = &strategy.mutation_families[family];
        let op = ops.sample_op(rng);
        let child = ops.apply(op, &parent.genome);
        mutated.push(Individual::evaluate(problem, child));
    }

    let offspring = Population {
        members: mutated,
        generation: t + 1,
    };
    match strategy.selection {
        SelectionRule::HybridElitist => hybrid_elitist_select(population, &offspring),
        SelectionRule::KeepParents => Ok(Population {
            members: population.members.clone(),
            generation: t + 1,
        }),
    }
}

/// Selection preserving both the best auxiliary level and the best objective
/// across parents and offspring.
///
/// The output always contains an individual achieving the combined maximum
/// auxiliary level and one achieving the combined best objective; remaining
/// slots are filled by truncation on (level desc, objective asc), ties broken
/// by pool position for determinism.
pub fn hybrid_elitist_select<P: Problem>(
    parents: &Population<P>,
    offspring: &Population<P>,
) -> Result<Population<P>, EngineError> {
    let m = parents.size();
    if offspring.size() != m {
        return Err(EngineError::SizeMismatch {
            parents: m,
            offspring: offspring.size(),
        });
    }
    let pool: Vec<&Individual<P>> = parents
        .members()
        .iter()
        .chain(offspring.members().iter())
        .collect();

    let mut ranked: Vec<usize> = (0..pool.len()).collect();
    ranked.sort_by(|&a, &b| {
        pool[b]
            .aux_level
            .cmp(&pool[a].aux_level)
            .then_with(|| pool[a].objective.cmp(&pool[b].objective))
            .then_with(|| a.cmp(&b))
    });
    let best_level = ranked[0];
    let best_objective = (0..pool.len())
        .min_by(|&a, &b| {
            pool[a]
                .objective
                .cmp(&pool[b].objective)
                .then_with(|| pool[b].aux_level.cmp(&pool[a].aux_level))
                .then_with(|| a.cmp(&b))
        })
        .expect("pool is never empty");

    let mut chosen = Vec::with_capacity(m);
    chosen.push(best_level);
    if best_objective != best_level {
        chosen.push(best_objective);
    }
    for &idx in &ranked {
        if chosen.len() == m {
            break;
        }
        if !chosen.contains(&idx) {
            chosen.push(idx);
        }
    }
    let members = chosen.into_iter().map(|idx| pool[idx].clone()).collect();
    Ok(Population {
        members,
        generation: offspring.generation(),
    })
}

/// One row of a run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<O> {
    pub generation: usize,
    pub aux_max: usize,
    pub best_objective: O,
    pub digest: u64,
}

/// Per-generation records plus the two hitting times of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<O> {
    pub seed: u64,
    pub records: Vec<TraceRecord<O>>,
    /// First generation whose population reaches the top auxiliary level.
    pub first_top_level: Option<usize>,
    /// First generation containing a satisfactory member.
    pub first_satisfactory: Option<usize>,
}

/// Stopping rule for [`run`]: always bounded by `budget` generations; when a
/// satisfactory predicate is present its first hit is recorded, and the run
/// stops there unless `stop_on_satisfactory` is cleared (budget mode).
pub struct StopRule<'a, G> {
    pub budget: u64,
    pub satisfactory: Option<Box<dyn Fn(&G) -> bool + 'a>>,
    pub stop_on_satisfactory: bool,
}

impl<'a, G> StopRule<'a, G> {
    pub fn budget_only(budget: u64) -> Self {
        StopRule {
            budget,
            satisfactory: None,
            stop_on_satisfactory: false,
        }
    }

    pub fn until_satisfactory(
        budget: u64,
        predicate: impl Fn(&G) -> bool + 'a,
    ) -> Self {
        StopRule {
            budget,
            satisfactory: Some(Box::new(predicate)),
            stop_on_satisfactory: true,
        }
    }
}

/// Runs the EA from `initial` until the stop rule fires, recording one trace
/// row per generation (including the initial population). Reruns with the
/// same seed, strategy, and problem produce identical traces.
pub fn run<P: Problem>(
    initial: Population<P>,
    strategy: &StrategyProfile<P>,
    problem: &P,
    stop: &StopRule<'_, P::Genome>,
    seed: u64,
) -> Result<RunTrace<P::Objective>, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = RunTrace {
        seed,
        records: Vec::new(),
        first_top_level: None,
        first_satisfactory: None,
    };
    let mut population = initial;
    record(&mut trace, &population, problem, stop);
    for _ in 0..stop.budget {
        if stop.stop_on_satisfactory && trace.first_satisfactory.is_some() {
            break;
        }
        population = step_generation(&population, strategy, problem, &mut rng)?;
        record(&mut trace, &population, problem, stop);
    }
    Ok(trace)
}

fn record<P: Problem>(
    trace: &mut RunTrace<P::Objective>,
    population: &Population<P>,
    problem: &P,
    stop: &StopRule<'_, P::Genome>,
) {
    let generation = population.generation();
    trace.records.push(TraceRecord {
        generation,
        aux_max: population.aux_max(),
        best_objective: population.best_objective(),
        digest: population.digest(),
    });
    if trace.first_top_level.is_none() && population.aux_max() == problem.top_level() {
        trace.first_top_level = Some(generation);
    }
    if trace.first_satisfactory.is_none() {
        if let Some(predicate) = &stop.satisfactory {
            if population.members().iter().any(|x| predicate(&x.genome)) {
                trace.first_satisfactory = Some(generation);
            }
        }
    }
}

#[derive(Default)]
struct Fnv1a(u64);

impl Fnv1a {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
}

impl Hasher for Fnv1a {
    fn write(&mut self, bytes: &[u8]) {
        if self.0 == 0 {
            self.0 = Self::OFFSET;
        }
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(Self::PRIME);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Identity recombination: the child is a copy of the first parent.
pub struct IdentityRecombination;

impl<G: Clone> RecombinationOps<G> for IdentityRecombination {
    fn count(&self) -> Option<u64> {
        Some(1)
    }

    fn apply(&self, _op: u64, first: &G, _second: &G) -> G {
        first.clone()
    }
}

/// Identity mutation: the child is an unchanged copy.
pub struct IdentityMutation;

impl<G: Clone> MutationOps<G> for IdentityMutation {
    fn count(&self) -> Option<u64> {
        Some(1)
    }

    fn apply(&self, _op: u64, genome: &G) -> G {
        genome.clone()
    }
}
