//! NSGA-II with Gaussian mutation and no recombination.
//!
//! Each generation draws from its own RNG stream derived from the run seed,
//! and each evaluation gets a rollout seed derived from its index. A run can
//! therefore be resumed from its evaluation records alone: replaying the
//! environmental selection over the logged fitness values reconstructs the
//! population exactly.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::{evaluate_with, Evaluation, Fitness, FitnessConfig, Outcome};
use crate::params::{decode, Genome, GENOME_LEN};
use crate::surrogate::{SurfaceModel, SurrogateConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMeta {
    pub generation: usize,
    pub eval_index: usize,
    pub seed: u64,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: Option<Fitness>,
    pub rank: Option<usize>,
    pub crowding: Option<f64>,
    pub meta: EvalMeta,
}

impl Individual {
    pub fn evaluated(genome: Genome, fitness: Fitness, meta: EvalMeta) -> Self {
        Self {
            genome,
            fitness: Some(fitness),
            rank: None,
            crowding: None,
            meta,
        }
    }

    fn from_record(r: &EvalRecord) -> Self {
        Self::evaluated(
            r.genome,
            r.fitness,
            EvalMeta {
                generation: r.generation,
                eval_index: r.eval_index,
                seed: r.seed,
                surface: r.surface.clone(),
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_sigma: f64,
    pub mutation_probability: f64,
    pub rng_seed: u64,
    pub surface: String,
    /// Count the initial population as the first generation of the budget
    /// (`generations * population_size` evaluations in total) instead of
    /// evaluating it on top of `generations` offspring generations.
    pub count_initial_in_budget: bool,
    pub fitness: FitnessConfig,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 8,
            generations: 32,
            mutation_sigma: 1.0 / 6.0,
            mutation_probability: 1.0,
            rng_seed: 0,
            surface: "A".into(),
            count_initial_in_budget: false,
            fitness: FitnessConfig::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Invalid("population_size must be at least 2".into()));
        }
        if self.generations < 1 {
            return Err(Error::Invalid("generations must be at least 1".into()));
        }
        if !(self.mutation_sigma > 0.0 && self.mutation_sigma.is_finite()) {
            return Err(Error::Invalid("mutation_sigma must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return Err(Error::Invalid(
                "mutation_probability must be in [0, 1]".into(),
            ));
        }
        self.fitness.validate()
    }

    pub fn offspring_generations(&self) -> usize {
        if self.count_initial_in_budget {
            self.generations - 1
        } else {
            self.generations
        }
    }

    /// Evaluations in a completed run, initial population included.
    pub fn total_evaluations(&self) -> usize {
        self.population_size * (self.offspring_generations() + 1)
    }
}

/// One logged evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub generation: usize,
    pub eval_index: usize,
    pub genome: Genome,
    pub fitness: Fitness,
    pub outcome: Outcome,
    pub surface: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub config: EvolutionConfig,
    /// Append-only, ordered by `eval_index`.
    pub records: Vec<EvalRecord>,
    /// Eval indices of the surviving population.
    pub final_population: Vec<usize>,
}

impl RunLog {
    pub fn final_individuals(&self) -> impl Iterator<Item = &EvalRecord> {
        self.final_population.iter().map(|&i| &self.records[i])
    }
}

/// Scores a genome for a given rollout seed.
pub trait Evaluator: Sync {
    fn evaluate(&self, genome: &Genome, seed: u64) -> Evaluation;
}

impl<F> Evaluator for F
where
    F: Fn(&Genome, u64) -> Evaluation + Sync,
{
    fn evaluate(&self, genome: &Genome, seed: u64) -> Evaluation {
        self(genome, seed)
    }
}

/// Evaluates genomes in the surrogate environment on one surface.
#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    pub surface: SurfaceModel,
    pub fitness: FitnessConfig,
    pub model: SurrogateConfig,
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&self, genome: &Genome, seed: u64) -> Evaluation {
        evaluate_with(
            &decode(genome),
            &self.surface,
            seed,
            &self.fitness,
            &self.model,
        )
        .unwrap_or(Evaluation {
            fitness: Fitness::FLOOR,
            outcome: Outcome::Failed,
        })
    }
}

/// SplitMix64 finalizer over `base + index`, used to derive independent
/// seeds from one run seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GENERATION_DOMAIN: u64 = 0x6765_6e65_7261_7469;
const EVALUATION_DOMAIN: u64 = 0x6576_616c_7561_7465;

pub fn generation_rng(run_seed: u64, generation: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(run_seed ^ GENERATION_DOMAIN, generation as u64))
}

pub fn evaluation_seed(run_seed: u64, eval_index: usize) -> u64 {
    derive_seed(run_seed ^ EVALUATION_DOMAIN, eval_index as u64)
}

/// Fronts of a fitness set, as index lists; front 0 is non-dominated.
pub fn nondominated_fronts(fits: &[Fitness]) -> Vec<Vec<usize>> {
    let n = fits.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in (p + 1)..n {
            if fits[p].dominates(&fits[q]) {
                dominates[p].push(q);
                dominated_by[q] += 1;
            } else if fits[q].dominates(&fits[p]) {
                dominates[q].push(p);
                dominated_by[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominates[p] {
                dominated_by[q] -= 1;
                if dominated_by[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn fitnesses(pop: &[Individual]) -> Result<Vec<Fitness>> {
    pop.iter()
        .enumerate()
        .map(|(i, ind)| ind.fitness.ok_or(Error::Unevaluated(i)))
        .collect()
}

/// Sorts `pop` into fronts and records each individual's rank.
pub fn fast_nondominated_sort(pop: &mut [Individual]) -> Result<Vec<Vec<usize>>> {
    let fits = fitnesses(pop)?;
    let fronts = nondominated_fronts(&fits);
    for (rank, front) in fronts.iter().enumerate() {
        for &i in front {
            pop[i].rank = Some(rank);
        }
    }
    Ok(fronts)
}

/// Crowding distance of each member of `front` (indices into `fits`),
/// returned in the same order. Boundary members get `+inf`.
pub fn crowding_distances(fits: &[Fitness], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let mut dist = vec![0.0; m];
    for objective in 0..2 {
        let value = |k: usize| fits[front[k]].as_array()[objective];
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
        let lo = value(order[0]);
        let hi = value(order[m - 1]);
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..m - 1 {
            let k = order[w];
            if dist[k].is_finite() {
                dist[k] += (value(order[w + 1]) - value(order[w - 1])) / range;
            }
        }
    }
    dist
}

/// Assigns crowding values to the members of `front`.
pub fn crowding_distance(pop: &mut [Individual], front: &[usize]) -> Result<()> {
    let fits = fitnesses(pop)?;
    for (&i, d) in front.iter().zip(crowding_distances(&fits, front)) {
        pop[i].crowding = Some(d);
    }
    Ok(())
}

/// Folds any real value into `[0, 1]` by mirroring at the bounds as often
/// as needed.
pub fn reflect_into_unit(x: f64) -> f64 {
    let mut y = if x.abs() > 4.0 { x.rem_euclid(2.0) } else { x };
    loop {
        if y > 1.0 {
            y = 2.0 - y;
        } else if y < 0.0 {
            y = -y;
        } else {
            return y;
        }
    }
}

/// Applies explicit perturbations with reflection at the bounds.
pub fn mutate_with(genome: &Genome, deltas: &[f64; GENOME_LEN]) -> Genome {
    let v: [f64; GENOME_LEN] =
        std::array::from_fn(|i| reflect_into_unit(genome.get(i) + deltas[i]));
    Genome::new(v).expect("reflection keeps every element in [0, 1]")
}

/// Gaussian mutation: each element is perturbed with `probability` by
/// `N(0, sigma^2)`.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    sigma: f64,
    probability: f64,
    rng: &mut R,
) -> Genome {
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    let deltas: [f64; GENOME_LEN] = std::array::from_fn(|_| {
        if probability >= 1.0 || rng.random::<f64>() < probability {
            normal.sample(rng)
        } else {
            0.0
        }
    });
    mutate_with(genome, &deltas)
}

/// NSGA-II comparison: lower rank first, then larger crowding.
fn crowded_compare(a: &Individual, b: &Individual) -> Ordering {
    let ra = a.rank.unwrap_or(usize::MAX);
    let rb = b.rank.unwrap_or(usize::MAX);
    ra.cmp(&rb).then_with(|| {
        let ca = a.crowding.unwrap_or(0.0);
        let cb = b.crowding.unwrap_or(0.0);
        cb.total_cmp(&ca)
    })
}

/// Binary tournaments on (rank, crowding); returns `count` indices into `pop`.
pub fn select_parents<R: Rng + ?Sized>(
    pop: &[Individual],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert!(!pop.is_empty(), "cannot select from an empty population");
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..pop.len());
            let b = rng.random_range(0..pop.len());
            match crowded_compare(&pop[a], &pop[b]) {
                Ordering::Less => a,
                Ordering::Greater => b,
                Ordering::Equal => {
                    if rng.random_bool(0.5) {
                        a
                    } else {
                        b
                    }
                }
            }
        })
        .collect()
}

/// Ranks `pool`, assigns crowding per front, and keeps the best `size`
/// individuals: whole fronts first, then the most isolated members of the
/// front that does not fit.
pub fn environmental_selection(mut pool: Vec<Individual>, size: usize) -> Result<Vec<Individual>> {
    let fronts = fast_nondominated_sort(&mut pool)?;
    for front in &fronts {
        crowding_distance(&mut pool, front)?;
    }
    let mut keep: Vec<usize> = Vec::with_capacity(size);
    for front in &fronts {
        if keep.len() + front.len() <= size {
            keep.extend_from_slice(front);
        } else {
            let mut rest = front.clone();
            rest.sort_by(|&a, &b| {
                let ca = pool[a].crowding.unwrap_or(0.0);
                let cb = pool[b].crowding.unwrap_or(0.0);
                cb.total_cmp(&ca).then(a.cmp(&b))
            });
            keep.extend(rest.into_iter().take(size - keep.len()));
        }
        if keep.len() == size {
            break;
        }
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| pool[i].clone()).collect())
}

/// Generational state of one run.
pub struct Evolution {
    config: EvolutionConfig,
    records: Vec<EvalRecord>,
    population: Vec<Individual>,
    next_generation: usize,
}

impl Evolution {
    pub fn new(config: EvolutionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            records: Vec::new(),
            population: Vec::new(),
            next_generation: 0,
        })
    }

    /// Rebuilds the state after the complete generations in `records`.
    /// Records from an unfinished trailing generation are discarded.
    pub fn resume(config: EvolutionConfig, records: Vec<EvalRecord>) -> Result<Self> {
        let mut evo = Self::new(config)?;
        let pop = evo.config.population_size;
        let complete = (records.len() / pop).min(evo.config.offspring_generations() + 1);
        for g in 0..complete {
            let chunk = &records[g * pop..(g + 1) * pop];
            for (k, r) in chunk.iter().enumerate() {
                if r.generation != g || r.eval_index != g * pop + k {
                    return Err(Error::Invalid(format!(
                        "record {} does not belong to generation {g}",
                        r.eval_index
                    )));
                }
            }
            let offspring: Vec<Individual> = chunk.iter().map(Individual::from_record).collect();
            evo.absorb(offspring)?;
            evo.records.extend_from_slice(chunk);
        }
        Ok(evo)
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn is_done(&self) -> bool {
        self.next_generation > self.config.offspring_generations()
    }

    fn absorb(&mut self, offspring: Vec<Individual>) -> Result<()> {
        let mut pool = std::mem::take(&mut self.population);
        pool.extend(offspring);
        self.population = environmental_selection(pool, self.config.population_size)?;
        self.next_generation += 1;
        Ok(())
    }

    fn propose(&self) -> Vec<Genome> {
        let cfg = &self.config;
        let mut rng = generation_rng(cfg.rng_seed, self.next_generation);
        if self.next_generation == 0 {
            return (0..cfg.population_size)
                .map(|_| {
                    let v: [f64; GENOME_LEN] = std::array::from_fn(|_| rng.random::<f64>());
                    Genome::new(v).expect("uniform draws are in [0, 1)")
                })
                .collect();
        }
        select_parents(&self.population, cfg.population_size, &mut rng)
            .into_iter()
            .map(|p| {
                mutate(
                    &self.population[p].genome,
                    cfg.mutation_sigma,
                    cfg.mutation_probability,
                    &mut rng,
                )
            })
            .collect()
    }

    /// Runs one generation and returns its new records.
    pub fn step<E: Evaluator + ?Sized>(&mut self, evaluator: &E) -> Result<&[EvalRecord]> {
        if self.is_done() {
            return Ok(&[]);
        }
        let generation = self.next_generation;
        let first = self.records.len();
        let genomes = self.propose();
        let seeds: Vec<u64> = (0..genomes.len())
            .map(|k| evaluation_seed(self.config.rng_seed, first + k))
            .collect();
        let evals: Vec<Evaluation> = genomes
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(g, &s)| evaluator.evaluate(g, s))
            .collect();

        let mut offspring = Vec::with_capacity(genomes.len());
        for (k, ((genome, seed), eval)) in genomes.into_iter().zip(seeds).zip(evals).enumerate() {
            let record = EvalRecord {
                generation,
                eval_index: first + k,
                genome,
                fitness: eval.fitness,
                outcome: eval.outcome,
                surface: self.config.surface.clone(),
                seed,
            };
            offspring.push(Individual::from_record(&record));
            self.records.push(record);
        }
        self.absorb(offspring)?;
        Ok(&self.records[first..])
    }

    pub fn into_log(self) -> RunLog {
        let final_population = self.population.iter().map(|i| i.meta.eval_index).collect();
        RunLog {
            config: self.config,
            records: self.records,
            final_population,
        }
    }
}

/// Runs a complete evolution.
pub fn run_evolution<E: Evaluator + ?Sized>(
    cfg: &EvolutionConfig,
    evaluator: &E,
) -> Result<RunLog> {
    let mut evo = Evolution::new(cfg.clone())?;
    while !evo.is_done() {
        evo.step(evaluator)?;
    }
    Ok(evo.into_log())
}
