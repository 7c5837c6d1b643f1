//! Generational genetic algorithm shared by formula evolution, scenario
//! search and task allocation.
//!
//! Every random decision for slot `s` of generation `g` is drawn from the
//! ChaCha stream `(seed, g << 32 | s)`, so evaluation order and worker count
//! never change the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GaError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoConfig {
    pub population: usize,
    pub generations: u32,
    pub tournament: usize,
    /// Probability that an offspring is produced by crossover rather than
    /// copied from its first parent.
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub elitism: usize,
    pub codon_len: usize,
    pub seed: u64,
    /// Evaluate fitness on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population: 200,
            generations: 100,
            tournament: 4,
            crossover_rate: 0.9,
            mutation_rate: 0.02,
            elitism: 2,
            codon_len: 64,
            seed: 1,
            parallel: true,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |m: &str| Err(GaError::InvalidConfig(m.to_string()));
        if self.population == 0 {
            return bad("population must be >= 1");
        }
        if self.elitism >= self.population {
            return bad("elitism must be smaller than the population");
        }
        if self.tournament == 0 {
            return bad("tournament size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if self.codon_len == 0 {
            return bad("codon_len must be >= 1");
        }
        Ok(())
    }
}

/// Fitness values are minimised. `summary` feeds the mean column of the
/// history.
pub trait Fitness: Ord + Clone + Send + Sync {
    fn summary(&self) -> f64;
}

impl Fitness for u64 {
    fn summary(&self) -> f64 {
        *self as f64
    }
}

pub trait Problem: Sync {
    type Genome: Clone + Send + Sync;
    type Fitness: Fitness;

    fn random(&self, cfg: &EvoConfig, rng: &mut ChaCha8Rng) -> Self::Genome;
    fn crossover(&self, a: &Self::Genome, b: &Self::Genome, rng: &mut ChaCha8Rng) -> Self::Genome;
    fn mutate(&self, g: &mut Self::Genome, rate: f64, rng: &mut ChaCha8Rng);
    fn fitness(&self, g: &Self::Genome) -> Self::Fitness;

    /// Whole-population evaluation. Override to share work between
    /// individuals (e.g. caching identical phenotypes); the default maps
    /// [`Problem::fitness`] over the genomes.
    fn evaluate(&self, genomes: &[Self::Genome], parallel: bool) -> Vec<Self::Fitness> {
        if parallel {
            genomes.par_iter().map(|g| self.fitness(g)).collect()
        } else {
            genomes.iter().map(|g| self.fitness(g)).collect()
        }
    }
}

pub fn slot_rng(seed: u64, generation: u32, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | slot as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population<G, F> {
    pub generation: u32,
    pub genomes: Vec<G>,
    pub fitness: Vec<F>,
}

impl<G, F: Ord> Population<G, F> {
    /// Indices sorted best first; ties keep slot order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.fitness.len()).collect();
        idx.sort_by(|&a, &b| self.fitness[a].cmp(&self.fitness[b]));
        idx
    }

    pub fn best(&self) -> (&G, &F) {
        let i = self.ranking()[0];
        (&self.genomes[i], &self.fitness[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenRecord<F> {
    pub generation: u32,
    pub best: F,
    pub best_index: usize,
    pub mean: f64,
}

pub fn record<G, F: Fitness>(pop: &Population<G, F>) -> GenRecord<F> {
    let best_index = pop.ranking()[0];
    let mean = pop.fitness.iter().map(Fitness::summary).sum::<f64>() / pop.fitness.len() as f64;
    GenRecord {
        generation: pop.generation,
        best: pop.fitness[best_index].clone(),
        best_index,
        mean,
    }
}

pub fn initial_population<P: Problem>(
    p: &P,
    cfg: &EvoConfig,
) -> Result<Population<P::Genome, P::Fitness>, GaError> {
    cfg.validate()?;
    let genomes: Vec<P::Genome> = (0..cfg.population)
        .map(|slot| p.random(cfg, &mut slot_rng(cfg.seed, 0, slot)))
        .collect();
    let fitness = p.evaluate(&genomes, cfg.parallel);
    Ok(Population {
        generation: 0,
        genomes,
        fitness,
    })
}

/// Re-scores a population, e.g. after the fitness landscape changed.
pub fn reevaluate<P: Problem>(
    p: &P,
    cfg: &EvoConfig,
    pop: Population<P::Genome, P::Fitness>,
) -> Population<P::Genome, P::Fitness> {
    let fitness = p.evaluate(&pop.genomes, cfg.parallel);
    Population { fitness, ..pop }
}

fn tournament<F: Ord>(fitness: &[F], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if (&fitness[c], c) < (&fitness[best], best) {
            best = c;
        }
    }
    best
}

/// Elites are copied unchanged; the remaining slots are filled by
/// tournament selection, crossover and mutation.
pub fn next_generation<P: Problem>(
    p: &P,
    cfg: &EvoConfig,
    pop: &Population<P::Genome, P::Fitness>,
) -> Population<P::Genome, P::Fitness> {
    let generation = pop.generation + 1;
    let ranking = pop.ranking();
    let elite: Vec<P::Genome> = ranking[..cfg.elitism]
        .iter()
        .map(|&i| pop.genomes[i].clone())
        .collect();
    let elite_fitness: Vec<P::Fitness> = ranking[..cfg.elitism]
        .iter()
        .map(|&i| pop.fitness[i].clone())
        .collect();
    let breed = |slot: usize| {
        let mut rng = slot_rng(cfg.seed, generation, slot);
        let a = tournament(&pop.fitness, cfg.tournament, &mut rng);
        let b = tournament(&pop.fitness, cfg.tournament, &mut rng);
        let mut child = if rng.random_bool(cfg.crossover_rate) {
            p.crossover(&pop.genomes[a], &pop.genomes[b], &mut rng)
        } else {
            pop.genomes[a].clone()
        };
        p.mutate(&mut child, cfg.mutation_rate, &mut rng);
        child
    };
    let offspring: Vec<P::Genome> = if cfg.parallel {
        (cfg.elitism..cfg.population).into_par_iter().map(breed).collect()
    } else {
        (cfg.elitism..cfg.population).map(breed).collect()
    };
    let offspring_fitness = p.evaluate(&offspring, cfg.parallel);
    let mut genomes = elite;
    genomes.extend(offspring);
    let mut fitness = elite_fitness;
    fitness.extend(offspring_fitness);
    Population {
        generation,
        genomes,
        fitness,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaRun<G, F> {
    pub history: Vec<GenRecord<F>>,
    pub last: Population<G, F>,
}

/// Runs `generations` steps from `pop`, recording the starting generation
/// too.
pub fn run_from<P: Problem>(
    p: &P,
    cfg: &EvoConfig,
    mut pop: Population<P::Genome, P::Fitness>,
    generations: u32,
) -> GaRun<P::Genome, P::Fitness> {
    let mut history = vec![record(&pop)];
    for _ in 0..generations {
        pop = next_generation(p, cfg, &pop);
        history.push(record(&pop));
    }
    GaRun { history, last: pop }
}

pub fn run<P: Problem>(p: &P, cfg: &EvoConfig) -> Result<GaRun<P::Genome, P::Fitness>, GaError> {
    let pop = initial_population(p, cfg)?;
    Ok(run_from(p, cfg, pop, cfg.generations))
}

/// One-point crossover of equal-length vectors.
pub fn one_point<T: Clone>(a: &[T], b: &[T], rng: &mut impl Rng) -> Vec<T> {
    let n = a.len().min(b.len());
    if n < 2 {
        return a.to_vec();
    }
    let cut = rng.random_range(1..n);
    a[..cut].iter().chain(&b[cut..]).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimise the number of ones in a bit string.
    struct OneMax;

    impl Problem for OneMax {
        type Genome = Vec<u8>;
        type Fitness = u64;

        fn random(&self, cfg: &EvoConfig, rng: &mut ChaCha8Rng) -> Vec<u8> {
            (0..cfg.codon_len).map(|_| rng.random_range(0..2)).collect()
        }
        fn crossover(&self, a: &Vec<u8>, b: &Vec<u8>, rng: &mut ChaCha8Rng) -> Vec<u8> {
            one_point(a, b, rng)
        }
        fn mutate(&self, g: &mut Vec<u8>, rate: f64, rng: &mut ChaCha8Rng) {
            for x in g.iter_mut() {
                if rng.random_bool(rate) {
                    *x ^= 1;
                }
            }
        }
        fn fitness(&self, g: &Vec<u8>) -> u64 {
            g.iter().map(|&x| x as u64).sum()
        }
    }

    fn cfg(parallel: bool) -> EvoConfig {
        EvoConfig {
            population: 40,
            generations: 30,
            codon_len: 32,
            elitism: 1,
            seed: 17,
            parallel,
            ..Default::default()
        }
    }

    #[test]
    fn solves_onemax_with_monotone_best() {
        let r = run(&OneMax, &cfg(true)).unwrap();
        assert_eq!(r.history.len(), 31);
        let best: Vec<u64> = r.history.iter().map(|h| h.best).collect();
        assert!(best.windows(2).all(|w| w[1] <= w[0]), "{best:?}");
        assert!(*best.last().unwrap() < best[0]);
    }

    #[test]
    fn serial_equals_parallel() {
        let a = run(&OneMax, &cfg(true)).unwrap();
        let b = run(&OneMax, &cfg(false)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(false);
        c.elitism = c.population;
        assert!(run(&OneMax, &c).is_err());
        let mut c = cfg(false);
        c.mutation_rate = 1.5;
        assert!(c.validate().is_err());
        assert!(EvoConfig::default().validate().is_ok());
    }

    #[test]
    fn one_point_keeps_length() {
        let mut rng = slot_rng(1, 0, 0);
        let c = one_point(&[0u8; 10], &[1u8; 10], &mut rng);
        assert_eq!(c.len(), 10);
        let cut = c.iter().position(|&x| x == 1).unwrap();
        assert!(c[cut..].iter().all(|&x| x == 1) && cut >= 1);
    }
}
