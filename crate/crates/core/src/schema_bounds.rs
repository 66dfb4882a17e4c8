//! Schema-survival probabilities and count tail bounds.
//!
//! Everything here is about the random variable `N(S, ·)`: how many members
//! of an intermediate population land in a subset `S` of the search space.
//! The module computes the closed-form lower bounds used to reason about the
//! EA (per-pair and averaged recombination success, multiplicative Chernoff
//! tails, the at-least-one bound through a seed schema, and their
//! composition with a selection conditional), and backs them with exact
//! enumeration oracles and a Monte Carlo fallback for cross-checking.

use rand::Rng;
use thiserror::Error;

use crate::engine::{Individual, PairSampling, Population, Problem, RuleCtx, StrategyProfile};

/// Enumeration oracles refuse configurations above this many operator
/// applications.
pub const ORACLE_ATOM_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("parameter out of range: {what}")]
    Domain { what: String },
    #[error("family-choice distribution sums to {sum}, not 1")]
    InvalidDistribution { sum: f64 },
    #[error("unsupported configuration: {what}")]
    UnsupportedConfiguration { what: String },
    #[error("exact enumeration needs more than {limit} operator applications")]
    OracleOverflow { limit: u64 },
}

/// A pure membership test for a subset of the search space.
pub struct SchemaPredicate<'a, G> {
    label: String,
    test: Box<dyn Fn(&G) -> bool + Sync + 'a>,
}

impl<'a, G> SchemaPredicate<'a, G> {
    pub fn new(label: impl Into<String>, test: impl Fn(&G) -> bool + Sync + 'a) -> Self {
        SchemaPredicate {
            label: label.into(),
            test: Box::new(test),
        }
    }

    pub fn contains(&self, genome: &G) -> bool {
        (self.test)(genome)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// The scalar inputs shared by the count bounds.
///
/// `p_avg` is the averaged per-position recombination success probability,
/// `pr_preserve`/`pr_create` the minimal mutation probabilities of keeping a
/// member in the subset and of moving an outsider in, `delta`/`eps` the two
/// Chernoff slacks, `alpha`/`beta` the recombination floor and the mutation
/// preservation floor for the at-least-one bound, and `count_s0` the number
/// of seed-schema members in the parent population.
#[derive(Debug, Clone, Copy)]
pub struct SchemaBoundInput {
    pub m: usize,
    pub p_avg: f64,
    pub pr_preserve: f64,
    pub pr_create: f64,
    pub delta: f64,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub count_s0: usize,
}

impl SchemaBoundInput {
    pub fn validate(&self) -> Result<(), SchemaError> {
        let unit = [
            ("p_avg", self.p_avg),
            ("pr_preserve", self.pr_preserve),
            ("pr_create", self.pr_create),
            ("delta", self.delta),
            ("eps", self.eps),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ];
        for (name, value) in unit {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(SchemaError::Domain {
                    what: format!("{name} = {value} outside [0, 1]"),
                });
            }
        }
        if self.m == 0 {
            return Err(SchemaError::Domain {
                what: "m = 0".into(),
            });
        }
        if self.count_s0 > self.m {
            return Err(SchemaError::Domain {
                what: format!("count_s0 = {} exceeds m = {}", self.count_s0, self.m),
            });
        }
        Ok(())
    }
}

fn enumerate_family_probability<G>(
    weights: &[f64],
    families: &[Box<dyn crate::engine::RecombinationOps<G>>],
    schema: &SchemaPredicate<'_, G>,
    first: &G,
    second: &G,
    budget: &mut u64,
) -> Result<f64, SchemaError> {
    let mut total = 0.0;
    for (w, &weight) in weights.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let family = families
            .get(w)
            .ok_or_else(|| SchemaError::UnsupportedConfiguration {
                what: format!("family index {w} out of range"),
            })?;
        let count = family
            .count()
            .ok_or_else(|| SchemaError::UnsupportedConfiguration {
                what: format!("recombination family {w} is not enumerable"),
            })?;
        if count > *budget {
            return Err(SchemaError::OracleOverflow {
                limit: ORACLE_ATOM_LIMIT,
            });
        }
        *budget -= count;
        let mut hits = 0u64;
        for op in 0..count {
            if schema.contains(&family.apply(op, first, second)) {
                hits += 1;
            }
        }
        total += weight * hits as f64 / count as f64;
    }
    Ok(total)
}

fn enumerate_mutation_probability<G>(
    weights: &[f64],
    families: &[Box<dyn crate::engine::MutationOps<G>>],
    schema: &SchemaPredicate<'_, G>,
    genome: &G,
    budget: &mut u64,
) -> Result<f64, SchemaError> {
    let mut total = 0.0;
    for (w, &weight) in weights.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let family = families
            .get(w)
            .ok_or_else(|| SchemaError::UnsupportedConfiguration {
                what: format!("family index {w} out of range"),
            })?;
        let count = family
            .count()
            .ok_or_else(|| SchemaError::UnsupportedConfiguration {
                what: format!("mutation family {w} is not enumerable"),
            })?;
        if count > *budget {
            return Err(SchemaError::OracleOverflow {
                limit: ORACLE_ATOM_LIMIT,
            });
        }
        *budget -= count;
        let mut hits = 0u64;
        for op in 0..count {
            if schema.contains(&family.apply(op, genome)) {
                hits += 1;
            }
        }
        total += weight * hits as f64 / count as f64;
    }
    Ok(total)
}

fn validated_weights<P: Problem>(
    rule: &crate::engine::FamilyChoiceRule<P>,
    population: &Population<P>,
    subject: &Individual<P>,
) -> Result<Vec<f64>, SchemaError> {
    let ctx = RuleCtx {
        population,
        generation: population.generation(),
        subject,
    };
    let dist = rule(&ctx);
    dist.validate()
        .map_err(|sum| SchemaError::InvalidDistribution { sum })?;
    Ok(dist.weights().to_vec())
}

/// Probability that recombining the ordered pair `(first, second)` under the
/// strategy's family-choice rule produces a member of the schema, by exact
/// enumeration of every family the rule puts mass on.
pub fn pair_success_probability<P: Problem>(
    schema: &SchemaPredicate<'_, P::Genome>,
    strategy: &StrategyProfile<P>,
    population: &Population<P>,
    first: &Individual<P>,
    second: &Individual<P>,
) -> Result<f64, SchemaError> {
    let weights = validated_weights(&strategy.recombination_choice, population, first)?;
    let mut budget = ORACLE_ATOM_LIMIT;
    enumerate_family_probability(
        &weights,
        &strategy.recombination_families,
        schema,
        &first.genome,
        &second.genome,
        &mut budget,
    )
}

/// The per-position success probability of the recombination stage: the
/// arithmetic mean of the pair success over ordered index pairs (distinct
/// indices without replacement, all pairs with replacement).
pub fn average_success_probability<P: Problem>(
    schema: &SchemaPredicate<'_, P::Genome>,
    strategy: &StrategyProfile<P>,
    population: &Population<P>,
    mode: PairSampling,
) -> Result<f64, SchemaError> {
    let m = population.size();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in 0..m {
            if mode == PairSampling::WithoutReplacement && i == j {
                continue;
            }
            total += pair_success_probability(
                schema,
                strategy,
                population,
                &population.members()[i],
                &population.members()[j],
            )?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Probability that the sampled mutation operator maps `individual` into the
/// schema, by exact enumeration.
pub fn mutation_success_probability<P: Problem>(
    schema: &SchemaPredicate<'_, P::Genome>,
    strategy: &StrategyProfile<P>,
    population: &Population<P>,
    individual: &Individual<P>,
) -> Result<f64, SchemaError> {
    let weights = validated_weights(&strategy.mutation_choice, population, individual)?;
    let mut budget = ORACLE_ATOM_LIMIT;
    enumerate_mutation_probability(
        &weights,
        &strategy.mutation_families,
        schema,
        &individual.genome,
        &mut budget,
    )
}

/// Multiplicative Chernoff bounds for a binomial count with mean `m * p`:
/// returns upper bounds on the probabilities of falling below
/// `(1 - delta) * m * p` and above `(1 + delta) * m * p`.
pub fn chernoff_count_bounds(p: f64, m: usize, delta: f64) -> Result<(f64, f64), SchemaError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(SchemaError::Domain {
            what: format!("p = {p} outside [0, 1]"),
        });
    }
    if !(0.0..=1.0).contains(&delta) || delta.is_nan() {
        return Err(SchemaError::Domain {
            what: format!("delta = {delta} outside [0, 1]"),
        });
    }
    if m == 0 {
        return Err(SchemaError::Domain {
            what: "m = 0".into(),
        });
    }
    let mean = m as f64 * p;
    let lower = (-delta * delta * mean / 2.0).exp().clamp(0.0, 1.0);
    let upper = (-delta * delta * mean / 3.0).exp().clamp(0.0, 1.0);
    Ok((lower, upper))
}

/// Lower bound on the probability that at least one schema member survives
/// the stage: seeing a seed-schema parent first at least once in `m` draws,
/// times the recombination floor `alpha`, times the mutation preservation
/// floor `beta` (`beta = 1` gives the recombination-only form).
pub fn small_count_lower_bound(
    count_s0: usize,
    m: usize,
    alpha: f64,
    beta: f64,
) -> Result<f64, SchemaError> {
    if m == 0 {
        return Err(SchemaError::Domain {
            what: "m = 0".into(),
        });
    }
    if count_s0 > m {
        return Err(SchemaError::Domain {
            what: format!("count_s0 = {count_s0} exceeds m = {m}"),
        });
    }
    for (name, value) in [("alpha", alpha), ("beta", beta)] {
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(SchemaError::Domain {
                what: format!("{name} = {value} outside [0, 1]"),
            });
        }
    }
    if count_s0 == 0 {
        return Ok(0.0);
    }
    let miss = 1.0 - count_s0 as f64 / m as f64;
    Ok((1.0 - miss.powi(m as i32)) * alpha * beta)
}

/// Lower bound on the expected schema count after mutation:
/// `m * (pr_preserve * (1 - eps) * P + pr_create * (1 - P * (1 + eps)))`,
/// with the create term floored at zero when `P * (1 + eps)` exceeds one and
/// the whole expression clamped to be nonnegative.
pub fn expected_count_lower_bound(input: &SchemaBoundInput) -> Result<f64, SchemaError> {
    input.validate()?;
    let p = input.p_avg;
    let create_share = (1.0 - p * (1.0 + input.eps)).max(0.0);
    let value = input.m as f64
        * (input.pr_preserve * (1.0 - input.eps) * p + input.pr_create * create_share);
    Ok(value.max(0.0))
}

/// Lower bound on the probability that the post-mutation schema count
/// reaches `(1 - delta)` times [`expected_count_lower_bound`]: the product
/// of the Chernoff factor at that mean with the probability that the
/// recombination count stayed inside its own `eps`-window.
pub fn after_mutation_tail_bound(input: &SchemaBoundInput) -> Result<f64, SchemaError> {
    let mu = expected_count_lower_bound(input)?;
    let first = 1.0 - (-input.delta * input.delta * mu / 2.0).exp();
    let mp = input.m as f64 * input.p_avg;
    let second = 1.0
        - (-input.eps * input.eps * mp / 2.0).exp()
        - (-input.eps * input.eps * mp / 3.0).exp();
    Ok((first * second).clamp(0.0, 1.0))
}

/// Which composition the combined bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaTheoremForm {
    /// Conditional times the post-mutation tail bound.
    TailBound,
    /// Conditional times the at-least-one bound.
    AtLeastOne,
}

/// The generalized schema bound: a caller-supplied conditional probability
/// (what selection does given enough schema members survived mutation)
/// multiplied by the survival bound of the chosen form. `n_threshold` is the
/// count the conditional refers to and must lie in `1..=m`.
pub fn schema_theorem_bound(
    input: &SchemaBoundInput,
    selection_conditional: f64,
    n_threshold: usize,
    form: SchemaTheoremForm,
) -> Result<f64, SchemaError> {
    if !(0.0..=1.0).contains(&selection_conditional) || selection_conditional.is_nan() {
        return Err(SchemaError::Domain {
            what: format!("selection_conditional = {selection_conditional} outside [0, 1]"),
        });
    }
    if n_threshold == 0 || n_threshold > input.m {
        return Err(SchemaError::Domain {
            what: format!("n_threshold = {n_threshold} outside 1..={}", input.m),
        });
    }
    let survival = match form {
        SchemaTheoremForm::TailBound => after_mutation_tail_bound(input)?,
        SchemaTheoremForm::AtLeastOne => {
            small_count_lower_bound(input.count_s0, input.m, input.alpha, input.beta)?
        }
    };
    Ok((selection_conditional * survival).clamp(0.0, 1.0))
}

/// Which stage of the cycle a count distribution describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountStage {
    /// From the given population through recombination only.
    Recombination,
    /// The given population is the intermediate one; mutate every position.
    MutationOnly,
    /// From the given population through recombination and mutation.
    RecombinationThenMutation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    ExactEnumeration,
    MonteCarlo { samples: u64 },
}

/// The distribution of the schema count `N(S, ·)` over `{0, ..., m}`.
#[derive(Debug, Clone)]
pub struct CountDistribution {
    probs: Vec<f64>,
    per_position: Vec<f64>,
    provenance: Provenance,
}

impl CountDistribution {
    fn from_positions(per_position: Vec<f64>, provenance: Provenance) -> Self {
        let mut probs = vec![1.0];
        for &p in &per_position {
            let mut next = vec![0.0; probs.len() + 1];
            for (k, &mass) in probs.iter().enumerate() {
                next[k] += mass * (1.0 - p);
                next[k + 1] += mass * p;
            }
            probs = next;
        }
        CountDistribution {
            probs,
            per_position,
            provenance,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Success probability of each position, independent across positions.
    pub fn per_position(&self) -> &[f64] {
        &self.per_position
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| k as f64 * p)
            .sum()
    }

    pub fn pr_at_least(&self, k: usize) -> f64 {
        self.probs.iter().skip(k).sum()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// The exact distribution of the schema count after the given stage, by full
/// enumeration of the per-position pair draws and operator choices. Each
/// position is independent, so the distribution is the convolution of the
/// per-position success probabilities.
pub fn exact_count_distribution<P: Problem>(
    schema: &SchemaPredicate<'_, P::Genome>,
    strategy: &StrategyProfile<P>,
    population: &Population<P>,
    problem: &P,
    stage: CountStage,
) -> Result<CountDistribution, SchemaError> {
    let m = population.size();
    let mut budget = ORACLE_ATOM_LIMIT;
    let per_position: Vec<f64> = match stage {
        CountStage::MutationOnly => {
            let mut ps = Vec::with_capacity(m);
            for member in population.members() {
                let weights = validated_weights(&strategy.mutation_choice, population, member)?;
                ps.push(enumerate_mutation_probability(
                    &weights,
                    &strategy.mutation_families,
                    schema,
                    &member.genome,
                    &mut budget,
                )?);
            }
            ps
        }
        CountStage::Recombination => {
            let p = position_probability_recombination(schema, strategy, population, &mut budget)?;
            vec![p; m]
        }
        CountStage::RecombinationThenMutation => {
            let p = position_probability_full(schema, strategy, population, problem, &mut budget)?;
            vec![p; m]
        }
    };
    Ok(CountDistribution::from_positions(
        per_position,
        Provenance::ExactEnumeration,
    ))
}

fn ordered_pairs(m: usize, mode: PairSampling) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if mode == PairSampling::WithoutReplacement && i == j {
                continue;
            }
            pairs.push((i, j));
        }
    }
    pairs
}

fn position_probability_recombination<P: Problem>(
    schema: &SchemaPredicate<'_, P::Genome>,
    strategy: &StrategyProfile<P>,
    population: &Population<P>,
    budget: &mut u64,
) -> Result<f64, SchemaError> {
    let pairs = ordered_pairs(population.size(), strategy.pair_sampling);
    let pair_weight = 1.0 / pairs.len() as f64;
    let mut total = 0.0;
    for (i, j) in pairs {
        let first = &population.members()[i];
        let second = &population.members()[j];
        let weights = validated_weights(&strategy.recombination_choice, population, first)?;
        total += pair_weight
            * enumerate_family_probability(
                &weights,
                &strategy.recombination_families,
                schema,
                &first.genome,
                &second.genome,
                budget,
            )?;
    }
    Ok(total)
}

fn position_probability_full<P: Problem>(
    schema: &SchemaPredicate<'_, P::Genome>,
    strategy: &StrategyProfile<P>,
    population: &Population<P>,
    problem: &P,
    budget: &mut u64,
) -> Result<f64, SchemaError> {
    let pairs = ordered_pairs(population.size(), strategy.pair_sampling);
    let pair_weight = 1.0 / pairs.len() as f64;
    let mut total = 0.0;
    for (i, j) in pairs {
        let first = &population.members()[i];
        let second = &population.members()[j];
        let rec_weights = validated_weights(&strategy.recombination_choice, population, first)?;
        for (w, &weight) in rec_weights.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            let family = strategy.recombination_families.get(w).ok_or_else(|| {
                SchemaError::UnsupportedConfiguration {
                    what: format!("family index {w} out of range"),
                }
            })?;
            let count = family
                .count()
                .ok_or_else(|| SchemaError::UnsupportedConfiguration {
                    what: format!("recombination family {w} is not enumerable"),
                })?;
            if count > *budget {
                return Err(SchemaError::OracleOverflow {
                    limit: ORACLE_ATOM_LIMIT,
                });
            }
            *budget -= count;
            let op_weight = weight / count as f64;
            for op in 0..count {
                let child =
                    Individual::evaluate(problem, family.apply(op, &first.genome, &second.genome));
                let mut_weights = validated_weights(&strategy.mutation_choice, population, &child)?;
                let success = enumerate_mutation_probability(
                    &mut_weights,
                    &strategy.mutation_families,
                    schema,
                    &child.genome,
                    budget,
                )?;
                total += pair_weight * op_weight * success;
            }
        }
    }
    Ok(total)
}

/// Monte Carlo estimate of the same distribution, for configurations the
/// exact oracle refuses. Per-position estimates are occurrence frequencies.
pub fn monte_carlo_count_distribution<P: Problem>(
    schema: &SchemaPredicate<'_, P::Genome>,
    strategy: &StrategyProfile<P>,
    population: &Population<P>,
    problem: &P,
    stage: CountStage,
    samples: u64,
    rng: &mut impl Rng,
) -> Result<CountDistribution, SchemaError> {
    if samples == 0 {
        return Err(SchemaError::Domain {
            what: "samples = 0".into(),
        });
    }
    let m = population.size();
    let mut histogram = vec![0u64; m + 1];
    let mut position_hits = vec![0u64; m];
    for _ in 0..samples {
        let mut count = 0usize;
        for position in 0..m {
            let genome = sample_position(strategy, population, problem, stage, position, rng)?;
            if schema.contains(&genome) {
                count += 1;
                position_hits[position] += 1;
            }
        }
        histogram[count] += 1;
    }
    let probs: Vec<f64> = histogram
        .iter()
        .map(|&c| c as f64 / samples as f64)
        .collect();
    let per_position = position_hits
        .iter()
        .map(|&c| c as f64 / samples as f64)
        .collect();
    Ok(CountDistribution {
        probs,
        per_position,
        provenance: Provenance::MonteCarlo { samples },
    })
}

fn sample_position<P: Problem>(
    strategy: &StrategyProfile<P>,
    population: &Population<P>,
    problem: &P,
    stage: CountStage,
    position: usize,
    rng: &mut impl Rng,
) -> Result<P::Genome, SchemaError> {
    let m = population.size();
    let choose = |rule: &crate::engine::FamilyChoiceRule<P>,
                  subject: &Individual<P>,
                  rng: &mut dyn rand::RngCore|
     -> Result<usize, SchemaError> {
        let ctx = RuleCtx {
            population,
            generation: population.generation(),
            subject,
        };
        let dist = rule(&ctx);
        dist.validate()
            .map_err(|sum| SchemaError::InvalidDistribution { sum })?;
        let mut rng = rng;
        Ok(dist.sample(&mut rng))
    };

    let recombined = match stage {
        CountStage::MutationOnly => population.members()[position].clone(),
        _ => {
            let first_index = rng.random_range(0..m);
            let second_index = match strategy.pair_sampling {
                PairSampling::WithReplacement => rng.random_range(0..m),
                PairSampling::WithoutReplacement => (first_index + rng.random_range(1..m)) % m,
            };
            let first = &population.members()[first_index];
            let second = &population.members()[second_index];
            let family = choose(&strategy.recombination_choice, first, rng)?;
            let ops = strategy.recombination_families.get(family).ok_or_else(|| {
                SchemaError::UnsupportedConfiguration {
                    what: format!("family index {family} out of range"),
                }
            })?;
            let op = ops.sample_op(rng);
            Individual::evaluate(problem, ops.apply(op, &first.genome, &second.genome))
        }
    };
    if stage == CountStage::Recombination {
        return Ok(recombined.genome);
    }
    let family = choose(&strategy.mutation_choice, &recombined, rng)?;
    let ops = strategy
        .mutation_families
        .get(family)
        .ok_or_else(|| SchemaError::UnsupportedConfiguration {
            what: format!("family index {family} out of range"),
        })?;
    let op = ops.sample_op(rng);
    Ok(ops.apply(op, &recombined.genome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{
        IdentityMutation, IdentityRecombination, IndexDistribution, MutationOps, RecombinationOps,
        SelectionRule,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Genomes carry an id and a success flag; the schema reads the flag.
    #[derive(Debug, Clone, PartialEq, Eq, Hash)]
    struct Marker {
        id: u8,
        in_schema: bool,
    }

    struct MarkerProblem;

    impl Problem for MarkerProblem {
        type Genome = Marker;
        type Objective = i64;

        fn aux_level(&self, _genome: &Marker) -> usize {
            0
        }

        fn objective(&self, _genome: &Marker) -> i64 {
            0
        }

        fn top_level(&self) -> usize {
            0
        }
    }

    /// Ten operators; `hits(x, y)` of them send the pair into the schema.
    struct TableRecombination {
        hits: fn(u8, u8) -> u64,
    }

    impl RecombinationOps<Marker> for TableRecombination {
        fn count(&self) -> Option<u64> {
            Some(10)
        }

        fn apply(&self, op: u64, first: &Marker, second: &Marker) -> Marker {
            Marker {
                id: first.id,
                in_schema: op < (self.hits)(first.id, second.id),
            }
        }
    }

    /// Ten operators; `hits(x)` of them land in the schema.
    struct TableMutation {
        hits: fn(u8) -> u64,
    }

    impl MutationOps<Marker> for TableMutation {
        fn count(&self) -> Option<u64> {
            Some(10)
        }

        fn apply(&self, op: u64, genome: &Marker) -> Marker {
            Marker {
                id: genome.id,
                in_schema: op < (self.hits)(genome.id),
            }
        }
    }

    fn flag_schema() -> SchemaPredicate<'static, Marker> {
        SchemaPredicate::new("flag", |g: &Marker| g.in_schema)
    }

    fn marker_population(flags: &[(u8, bool)]) -> Population<MarkerProblem> {
        Population::new(
            flags
                .iter()
                .map(|&(id, in_schema)| {
                    Individual::evaluate(&MarkerProblem, Marker { id, in_schema })
                })
                .collect(),
            0,
        )
        .unwrap()
    }

    fn table_strategy(
        rec_hits: fn(u8, u8) -> u64,
        mut_hits: fn(u8) -> u64,
    ) -> StrategyProfile<MarkerProblem> {
        StrategyProfile {
            recombination_families: vec![Box::new(TableRecombination { hits: rec_hits })],
            mutation_families: vec![Box::new(TableMutation { hits: mut_hits })],
            recombination_choice: Box::new(|_| IndexDistribution::point(0, 1)),
            mutation_choice: Box::new(|_| IndexDistribution::point(0, 1)),
            pair_sampling: PairSampling::WithoutReplacement,
            selection: SelectionRule::HybridElitist,
        }
    }

    fn identity_strategy() -> StrategyProfile<MarkerProblem> {
        StrategyProfile {
            recombination_families: vec![Box::new(IdentityRecombination)],
            mutation_families: vec![Box::new(IdentityMutation)],
            recombination_choice: Box::new(|_| IndexDistribution::point(0, 1)),
            mutation_choice: Box::new(|_| IndexDistribution::point(0, 1)),
            pair_sampling: PairSampling::WithoutReplacement,
            selection: SelectionRule::HybridElitist,
        }
    }

    #[test]
    fn identity_family_preserves_membership() {
        let population = marker_population(&[(1, true), (2, false)]);
        let strategy = identity_strategy();
        let schema = flag_schema();
        let inside = pair_success_probability(
            &schema,
            &strategy,
            &population,
            &population.members()[0],
            &population.members()[1],
        )
        .unwrap();
        assert_eq!(inside, 1.0);
        let outside = pair_success_probability(
            &schema,
            &strategy,
            &population,
            &population.members()[1],
            &population.members()[0],
        )
        .unwrap();
        assert_eq!(outside, 0.0);
    }

    #[test]
    fn average_over_ordered_pairs_without_replacement() {
        // Pr(S | (1, 2)) = 0.4 and Pr(S | (2, 1)) = 0.8.
        fn rec(x: u8, _y: u8) -> u64 {
            match x {
                1 => 4,
                2 => 8,
                _ => 0,
            }
        }
        let population = marker_population(&[(1, false), (2, false)]);
        let strategy = table_strategy(rec, |_| 0);
        let schema = flag_schema();
        let p = average_success_probability(
            &schema,
            &strategy,
            &population,
            PairSampling::WithoutReplacement,
        )
        .unwrap();
        assert!((p - 0.6).abs() < 1e-15);
    }

    #[test]
    fn average_over_ordered_pairs_with_replacement() {
        // Adds Pr(S | (1, 1)) = 1 and Pr(S | (2, 2)) = 0 to the mix.
        fn rec(x: u8, y: u8) -> u64 {
            match (x, y) {
                (1, 1) => 10,
                (1, 2) => 4,
                (2, 1) => 8,
                _ => 0,
            }
        }
        let population = marker_population(&[(1, false), (2, false)]);
        let strategy = table_strategy(rec, |_| 0);
        let schema = flag_schema();
        let p = average_success_probability(
            &schema,
            &strategy,
            &population,
            PairSampling::WithReplacement,
        )
        .unwrap();
        assert!((p - 0.55).abs() < 1e-15);
    }

    #[test]
    fn constant_pair_probability_averages_to_itself() {
        fn rec(_x: u8, _y: u8) -> u64 {
            7
        }
        let population = marker_population(&[(1, false), (2, false), (3, false)]);
        let strategy = table_strategy(rec, |_| 0);
        let schema = flag_schema();
        for mode in [
            PairSampling::WithoutReplacement,
            PairSampling::WithReplacement,
        ] {
            let p = average_success_probability(&schema, &strategy, &population, mode).unwrap();
            assert!((p - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn chernoff_bounds_are_vacuous_at_zero_slack() {
        assert_eq!(chernoff_count_bounds(0.3, 12, 0.0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn chernoff_lower_tail_value() {
        let (lower, _) = chernoff_count_bounds(0.5, 8, 0.5).unwrap();
        assert!((lower - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn chernoff_dominates_exact_binomial_tails() {
        // Oracle: direct binomial summation.
        fn binomial_pmf(m: usize, k: usize, p: f64) -> f64 {
            let mut choose = 1.0f64;
            for i in 0..k {
                choose = choose * (m - i) as f64 / (i + 1) as f64;
            }
            choose * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32)
        }
        let m = 20;
        let p = 0.5;
        for delta in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
            let mean = m as f64 * p;
            let exact_lower: f64 = (0..m + 1)
                .filter(|&k| (k as f64) < (1.0 - delta) * mean)
                .map(|k| binomial_pmf(m, k, p))
                .sum();
            let exact_upper: f64 = (0..m + 1)
                .filter(|&k| (k as f64) > (1.0 + delta) * mean)
                .map(|k| binomial_pmf(m, k, p))
                .sum();
            let (lower, upper) = chernoff_count_bounds(p, m, delta).unwrap();
            assert!(exact_lower <= lower + 1e-12, "delta {delta}");
            assert!(exact_upper <= upper + 1e-12, "delta {delta}");
        }
        // The worked tail case: Pr(N < 5) at m = 20, p = 0.5, delta = 0.5.
        let exact: f64 = (0..5).map(|k| binomial_pmf(20, k, 0.5)).sum();
        let (lower, _) = chernoff_count_bounds(0.5, 20, 0.5).unwrap();
        assert!(exact <= lower);
    }

    #[test]
    fn seed_count_bound_examples() {
        // Full seed population collapses to alpha * beta.
        assert!((small_count_lower_bound(4, 4, 0.3, 0.5).unwrap() - 0.15).abs() < 1e-15);
        // One seed member out of four, alpha = 1/3.
        let value = small_count_lower_bound(1, 4, 1.0 / 3.0, 1.0).unwrap();
        let expected = (1.0 - 0.75f64.powi(4)) / 3.0;
        assert!((value - expected).abs() < 1e-15);
        assert!((value - 0.2279).abs() < 1e-4);
        // No seed member: nothing to select.
        assert_eq!(small_count_lower_bound(0, 4, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn expected_count_bound_collapses_without_create_term() {
        let input = SchemaBoundInput {
            m: 6,
            p_avg: 0.4,
            pr_preserve: 0.7,
            pr_create: 0.0,
            delta: 0.0,
            eps: 0.0,
            alpha: 1.0,
            beta: 1.0,
            count_s0: 1,
        };
        let value = expected_count_lower_bound(&input).unwrap();
        assert!((value - 6.0 * 0.7 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn expected_count_bound_worked_example() {
        let input = SchemaBoundInput {
            m: 10,
            p_avg: 0.3,
            pr_preserve: 0.9,
            pr_create: 0.05,
            delta: 0.0,
            eps: 0.1,
            alpha: 1.0,
            beta: 1.0,
            count_s0: 1,
        };
        let value = expected_count_lower_bound(&input).unwrap();
        assert!((value - 2.765).abs() < 1e-12);
    }

    #[test]
    fn equal_rates_stay_below_the_exact_mean() {
        // With pr_preserve = pr_create = p the bound is m * p * (1 - 2 eps P),
        // which never exceeds the exact mean m * p.
        for (p, eps, p_avg, m) in [(0.3, 0.2, 0.5, 7), (0.9, 0.05, 0.1, 3), (0.5, 1.0, 0.4, 12)] {
            let input = SchemaBoundInput {
                m,
                p_avg,
                pr_preserve: p,
                pr_create: p,
                delta: 0.0,
                eps,
                alpha: 1.0,
                beta: 1.0,
                count_s0: 1,
            };
            let value = expected_count_lower_bound(&input).unwrap();
            let closed_form = m as f64 * p * (1.0 - 2.0 * eps * p_avg);
            assert!((value - closed_form.max(0.0)).abs() < 1e-12);
            assert!(value <= m as f64 * p + 1e-12);
        }
    }

    #[test]
    fn tail_bound_vanishes_with_zero_mean() {
        let input = SchemaBoundInput {
            m: 5,
            p_avg: 0.2,
            pr_preserve: 0.0,
            pr_create: 0.0,
            delta: 0.5,
            eps: 0.5,
            alpha: 1.0,
            beta: 1.0,
            count_s0: 1,
        };
        assert_eq!(after_mutation_tail_bound(&input).unwrap(), 0.0);
    }

    #[test]
    fn tail_bound_worked_example() {
        let input = SchemaBoundInput {
            m: 20,
            p_avg: 0.5,
            pr_preserve: 1.0,
            pr_create: 0.0,
            delta: 0.5,
            eps: 0.5,
            alpha: 1.0,
            beta: 1.0,
            count_s0: 1,
        };
        let mu = expected_count_lower_bound(&input).unwrap();
        assert!((mu - 5.0).abs() < 1e-15);
        let expected =
            (1.0 - (-0.125f64 * mu).exp()) * (1.0 - (-1.25f64).exp() - (-2.5f64 / 3.0).exp());
        let value = after_mutation_tail_bound(&input).unwrap();
        assert!((value - expected).abs() < 1e-15);
    }

    #[test]
    fn tail_bound_clamps_the_vacuous_case() {
        let input = SchemaBoundInput {
            m: 5,
            p_avg: 0.0,
            pr_preserve: 1.0,
            pr_create: 1.0,
            delta: 0.5,
            eps: 1.0,
            alpha: 1.0,
            beta: 1.0,
            count_s0: 1,
        };
        // The window factor is 1 - 1 - 1 < 0; the bound clamps to zero.
        assert_eq!(after_mutation_tail_bound(&input).unwrap(), 0.0);
    }

    #[test]
    fn theorem_bound_reduces_to_the_survival_bounds() {
        let input = SchemaBoundInput {
            m: 8,
            p_avg: 0.4,
            pr_preserve: 0.9,
            pr_create: 0.1,
            delta: 0.3,
            eps: 0.2,
            alpha: 0.25,
            beta: 0.5,
            count_s0: 2,
        };
        let tail = schema_theorem_bound(&input, 1.0, 1, SchemaTheoremForm::TailBound).unwrap();
        assert_eq!(tail, after_mutation_tail_bound(&input).unwrap());
        let at_least = schema_theorem_bound(&input, 1.0, 1, SchemaTheoremForm::AtLeastOne).unwrap();
        assert_eq!(at_least, small_count_lower_bound(2, 8, 0.25, 0.5).unwrap());
    }

    #[test]
    fn at_least_one_composition_matches_the_seed_bound_example() {
        let input = SchemaBoundInput {
            m: 4,
            p_avg: 0.0,
            pr_preserve: 1.0,
            pr_create: 0.0,
            delta: 0.0,
            eps: 0.0,
            alpha: 1.0 / 3.0,
            beta: 1.0,
            count_s0: 1,
        };
        let value = schema_theorem_bound(&input, 1.0, 1, SchemaTheoremForm::AtLeastOne).unwrap();
        assert!((value - (1.0 - 0.75f64.powi(4)) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn seed_selection_factor_tends_to_the_classic_limit() {
        // (1 - (1 - 1/m)^m) decreases towards 1 - 1/e ~ 0.6321.
        let mut previous = 1.0f64;
        let limit = 1.0 - (-1.0f64).exp();
        for m in [2usize, 4, 16, 256, 65_536] {
            let value = small_count_lower_bound(1, m, 1.0, 1.0).unwrap();
            assert!(value < previous);
            assert!(value > limit);
            previous = value;
        }
        let huge = small_count_lower_bound(1, 100_000_000, 1.0, 1.0).unwrap();
        assert!((huge - limit).abs() < 1e-6);
        assert!((limit - 0.6321).abs() < 1e-4);
    }

    #[test]
    fn identity_mutation_gives_a_point_mass() {
        let population = marker_population(&[(1, true), (2, false), (3, true)]);
        let strategy = identity_strategy();
        let schema = flag_schema();
        let dist = exact_count_distribution(
            &schema,
            &strategy,
            &population,
            &MarkerProblem,
            CountStage::MutationOnly,
        )
        .unwrap();
        assert_eq!(dist.probs(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_recombination_resamples_binomially() {
        // One of two members is in the schema; copying a uniform first
        // parent succeeds with probability 1/2 per position.
        let population = marker_population(&[(1, true), (2, false)]);
        let strategy = identity_strategy();
        let schema = flag_schema();
        let dist = exact_count_distribution(
            &schema,
            &strategy,
            &population,
            &MarkerProblem,
            CountStage::Recombination,
        )
        .unwrap();
        for (got, want) in dist.probs().iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn distribution_mean_is_the_sum_of_position_probabilities() {
        fn rec(x: u8, y: u8) -> u64 {
            (x as u64 * 3 + y as u64) % 11
        }
        fn mutate(x: u8) -> u64 {
            (x as u64 * 7) % 10
        }
        let population = marker_population(&[(1, false), (2, true), (3, false)]);
        let strategy = table_strategy(rec, mutate);
        let schema = flag_schema();
        for stage in [
            CountStage::Recombination,
            CountStage::MutationOnly,
            CountStage::RecombinationThenMutation,
        ] {
            let dist =
                exact_count_distribution(&schema, &strategy, &population, &MarkerProblem, stage)
                    .unwrap();
            let sum: f64 = dist.per_position().iter().sum();
            assert!((dist.mean() - sum).abs() < 1e-12, "stage {stage:?}");
        }
    }

    #[test]
    fn per_position_matches_the_averaged_probability() {
        fn rec(x: u8, y: u8) -> u64 {
            (x as u64 + 2 * y as u64) % 10
        }
        let population = marker_population(&[(1, false), (2, false), (3, false)]);
        let strategy = table_strategy(rec, |_| 0);
        let schema = flag_schema();
        let p = average_success_probability(
            &schema,
            &strategy,
            &population,
            PairSampling::WithoutReplacement,
        )
        .unwrap();
        let dist = exact_count_distribution(
            &schema,
            &strategy,
            &population,
            &MarkerProblem,
            CountStage::Recombination,
        )
        .unwrap();
        for &position in dist.per_position() {
            assert!((position - p).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_tracks_the_exact_distribution() {
        fn rec(x: u8, y: u8) -> u64 {
            (3 * x as u64 + y as u64) % 10
        }
        fn mutate(x: u8) -> u64 {
            (x as u64 * 3 + 1) % 10
        }
        let population = marker_population(&[(1, true), (2, false), (3, true)]);
        let strategy = table_strategy(rec, mutate);
        let schema = flag_schema();
        let exact = exact_count_distribution(
            &schema,
            &strategy,
            &population,
            &MarkerProblem,
            CountStage::RecombinationThenMutation,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let samples = 100_000u64;
        let mc = monte_carlo_count_distribution(
            &schema,
            &strategy,
            &population,
            &MarkerProblem,
            CountStage::RecombinationThenMutation,
            samples,
            &mut rng,
        )
        .unwrap();
        for (k, (&estimate, &truth)) in mc.probs().iter().zip(exact.probs()).enumerate() {
            let se = (truth * (1.0 - truth) / samples as f64).sqrt();
            assert!(
                (estimate - truth).abs() <= 3.0 * se + 1e-9,
                "bin {k}: {estimate} vs {truth}"
            );
        }
    }

    #[test]
    fn input_validation_rejects_out_of_range() {
        let mut input = SchemaBoundInput {
            m: 4,
            p_avg: 0.5,
            pr_preserve: 0.5,
            pr_create: 0.5,
            delta: 0.5,
            eps: 0.5,
            alpha: 0.5,
            beta: 0.5,
            count_s0: 2,
        };
        assert!(input.validate().is_ok());
        input.p_avg = 1.5;
        assert!(input.validate().is_err());
        input.p_avg = 0.5;
        input.count_s0 = 5;
        assert!(input.validate().is_err());
        assert!(chernoff_count_bounds(-0.1, 4, 0.5).is_err());
        assert!(chernoff_count_bounds(0.5, 4, 1.5).is_err());
    }
}
