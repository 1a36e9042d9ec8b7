//! Seeded genetic algorithm over role assignments.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operators::{crossover, mutate, random_cuts, repair};
use super::{Evaluator, Genome, SearchSpace, SelectionError, VOVariant};
use crate::spec::FitnessFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub crossover_probability: f64,
    pub mutation_probability: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 50,
            generations: 200,
            tournament_size: 3,
            elite_count: 2,
            crossover_probability: 0.9,
            mutation_probability: 0.2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn with_seed(seed: u64) -> Self {
        GaConfig {
            seed,
            ..GaConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        let bad = |m: &str| Err(SelectionError::InvalidConfig(m.to_string()));
        if self.population_size == 0 || self.generations == 0 || self.tournament_size == 0 || self.elite_count == 0 {
            return bad("population, generations, tournament size and elite count must be positive");
        }
        if self.elite_count >= self.population_size {
            return bad("elite count must be smaller than the population");
        }
        if self.tournament_size > self.population_size {
            return bad("tournament size must not exceed the population");
        }
        let p = |x: f64| (0.0..=1.0).contains(&x);
        if !p(self.crossover_probability) || !p(self.mutation_probability) {
            return bad("probabilities must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    /// Distinct archived genomes at or above the threshold, sorted.
    pub variants: Vec<VOVariant>,
    /// Best archived fitness after initialization and after each generation.
    pub best_per_generation: Vec<f64>,
    pub evaluations: usize,
}

struct Scored {
    genome: Genome,
    fitness: f64,
}

fn better(a: &Scored, b: &Scored) -> Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then_with(|| a.genome.cmp(&b.genome))
}

fn random_genome(space: &SearchSpace<'_>, rng: &mut ChaCha8Rng) -> Genome {
    Genome(
        space
            .sets
            .iter()
            .map(|s| s.candidates[rng.gen_range(0..s.candidates.len())].element_id.clone())
            .collect(),
    )
}

fn tournament<'p>(pop: &'p [Scored], k: usize, rng: &mut ChaCha8Rng) -> &'p Scored {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..k {
        let c = &pop[rng.gen_range(0..pop.len())];
        if better(c, best) == Ordering::Less {
            best = c;
        }
    }
    best
}

pub fn run_ga(
    fitness: &FitnessFunction<'_>,
    space: &SearchSpace<'_>,
    config: &GaConfig,
) -> Result<GaOutcome, SelectionError> {
    config.validate()?;
    space.check_nonempty()?;
    let spec = fitness.spec();
    if space.sets.len() != spec.roles.len() {
        return Err(SelectionError::LengthMismatch {
            expected: spec.roles.len(),
            got: space.sets.len(),
        });
    }
    let threshold = spec.thresholds.phase3_threshold;
    let Some(fallback) = space.first_feasible() else {
        log::info!("no genome satisfies exclusivity; nothing to search");
        return Ok(GaOutcome {
            variants: Vec::new(),
            best_per_generation: Vec::new(),
            evaluations: 0,
        });
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eval = Evaluator::new(fitness);
    let score = |g: Genome, eval: &mut Evaluator<'_, '_>| -> Result<Scored, SelectionError> {
        let fitness = eval.fitness(&g)?;
        Ok(Scored { genome: g, fitness })
    };

    let mut population = Vec::with_capacity(config.population_size);
    for _ in 0..config.population_size {
        let g = repair(random_genome(space, &mut rng), space).unwrap_or_else(|| fallback.clone());
        population.push(score(g, &mut eval)?);
    }
    population.sort_by(better);
    let mut best = population[0].fitness;
    let mut best_per_generation = Vec::with_capacity(config.generations + 1);
    best_per_generation.push(best);

    for _ in 0..config.generations {
        let mut next: Vec<Genome> = population
            .iter()
            .take(config.elite_count)
            .map(|s| s.genome.clone())
            .collect();
        while next.len() < config.population_size {
            let a = &tournament(&population, config.tournament_size, &mut rng).genome;
            let b = &tournament(&population, config.tournament_size, &mut rng).genome;
            let mut children = (a.clone(), b.clone());
            if rng.gen_bool(config.crossover_probability) {
                if let Some((ca, cb)) = random_cuts(a.len(), &mut rng) {
                    let (c1, c2) = crossover(a, b, ca, cb)?;
                    children = (
                        repair(c1, space).unwrap_or_else(|| a.clone()),
                        repair(c2, space).unwrap_or_else(|| b.clone()),
                    );
                }
            }
            for child in [children.0, children.1] {
                if next.len() == config.population_size {
                    break;
                }
                let child = if rng.gen_bool(config.mutation_probability) {
                    mutate(&child, space, &mut rng)
                } else {
                    child
                };
                next.push(child);
            }
        }
        population = next
            .into_iter()
            .map(|g| score(g, &mut eval))
            .collect::<Result<_, _>>()?;
        population.sort_by(better);
        best = best.max(population[0].fitness);
        best_per_generation.push(best);
    }

    Ok(GaOutcome {
        variants: eval.variants_above(threshold),
        best_per_generation,
        evaluations: eval.evaluations(),
    })
}
