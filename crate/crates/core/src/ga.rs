//! Genetic refinement of a greedy solution.
//!
//! Genome position `i` holds the frequency index of vertex `i`. Fitness is
//! `|A| * (N_fail + modifier)`, smaller is better, ties broken by range.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checker::check_feasibility;
use crate::error::{FapError, Result};
use crate::model::{Assignment, FrequencyPlan};
use crate::nfd::SeparationMatrix;
use crate::solvers::{split_seed, SolutionPool};

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<u32>,
    pub fitness: f64,
    pub feasible: bool,
    pub n_fail: usize,
    pub used_count: usize,
    /// MHz
    pub range: f64,
}

impl Individual {
    /// Evaluates `genome` against the separations and optional range cap.
    pub fn evaluate(
        genome: Vec<u32>,
        sep: &SeparationMatrix,
        plan: &FrequencyPlan,
        modifier: f64,
        range_cap: Option<f64>,
    ) -> Self {
        let a = Assignment::new(genome);
        let m = check_feasibility(&a, sep, plan, range_cap);
        Individual {
            fitness: m.used_count as f64 * (m.fail_count as f64 + modifier),
            feasible: m.feasible,
            n_fail: m.fail_count,
            used_count: m.used_count,
            range: m.range,
            genome: a.into_indices(),
        }
    }

    /// Fitness first, then range.
    pub fn compare(&self, other: &Individual) -> Ordering {
        self.fitness.total_cmp(&other.fitness).then(self.range.total_cmp(&other.range))
    }
}

/// `|A| * (N_fail + modifier)` where `N_fail` counts links with a violated
/// separation.
pub fn fitness(genome: &[u32], sep: &SeparationMatrix, plan: &FrequencyPlan, modifier: f64) -> f64 {
    Individual::evaluate(genome.to_vec(), sep, plan, modifier, None).fitness
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub modifier: f64,
    pub mutation_rate: f64,
    pub elite_fraction: f64,
    pub seed: u64,
    pub balancing_factor: f64,
    pub range_cap: Option<f64>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            generations: 200,
            modifier: 1.0,
            mutation_rate: 0.2,
            elite_fraction: 0.2,
            seed: 0,
            balancing_factor: 0.5,
            range_cap: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FapError::InvalidParameters(msg));
        if self.population < 1 {
            return bad("population must be >= 1".into());
        }
        if !(self.modifier > 0.0) {
            return bad(format!("modifier {} must be positive", self.modifier));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad(format!("mutation rate {} outside [0, 1]", self.mutation_rate));
        }
        if !(0.0..=1.0).contains(&self.elite_fraction) || self.elite_count() < 1 {
            return bad(format!(
                "elite fraction {} keeps no individual of {}",
                self.elite_fraction, self.population
            ));
        }
        if !(0.0..=1.0).contains(&self.balancing_factor) {
            return bad(format!("balancing factor {} outside [0, 1]", self.balancing_factor));
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population as f64).floor() as usize).min(self.population)
    }
}

/// Exchanges the indices of links `i` and `j`.
pub fn swap(genome: &mut [u32], i: usize, j: usize) {
    genome.swap(i, j);
}

fn usage(genome: &[u32]) -> Vec<(u32, usize)> {
    let mut sorted = genome.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<(u32, usize)> = Vec::new();
    for k in sorted {
        match out.last_mut() {
            Some((last, c)) if *last == k => *c += 1,
            _ => out.push((k, 1)),
        }
    }
    out
}

/// Most-used index, lowest on ties.
fn most_used(genome: &[u32]) -> Option<u32> {
    usage(genome).into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(k, _)| k)
}

/// Least-used index, lowest on ties.
fn least_used(genome: &[u32]) -> Option<u32> {
    usage(genome).into_iter().min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0))).map(|(k, _)| k)
}

/// Moves link `v` to a uniformly chosen index not used elsewhere in the
/// genome that keeps all its separations. Leaves the genome alone when no
/// such index exists.
pub fn add_frequency<R: Rng + ?Sized>(
    genome: &mut [u32],
    v: usize,
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    rng: &mut R,
) -> bool {
    let used: std::collections::HashSet<u32> = genome.iter().copied().collect();
    let neighbours: Vec<(u32, u32)> = (0..genome.len())
        .filter(|&u| u != v && sep.get(u, v) > 0)
        .map(|u| (genome[u], sep.get(u, v)))
        .collect();
    let fits = |k: u32| neighbours.iter().all(|&(m, w)| k.abs_diff(m) >= w);
    let options: Vec<u32> = (1..=plan.count()).filter(|k| !used.contains(k) && fits(*k)).collect();
    match options.choose(rng) {
        Some(&k) => {
            genome[v] = k;
            true
        }
        None => false,
    }
}

/// Builds the initial population: the seed itself, then variants made by
/// swap, change (to the most- and least-used index), add-frequency and
/// permutation, cycling until the population is full.
pub fn init_population<R: Rng + ?Sized>(
    seed_solution: &Assignment,
    config: &GaConfig,
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    rng: &mut R,
) -> Vec<Vec<u32>> {
    let base = seed_solution.indices().to_vec();
    let n = base.len();
    let mut out = vec![base.clone()];
    let mut op = 0usize;
    while out.len() < config.population {
        let mut g = base.clone();
        if n > 0 {
            match op % 5 {
                0 => {
                    let i = rng.gen_range(0..n);
                    let j = rng.gen_range(0..n);
                    swap(&mut g, i, j);
                }
                1 => {
                    let i = rng.gen_range(0..n);
                    g[i] = most_used(&base).unwrap_or(g[i]);
                }
                2 => {
                    let i = rng.gen_range(0..n);
                    g[i] = least_used(&base).unwrap_or(g[i]);
                }
                3 => {
                    let i = rng.gen_range(0..n);
                    add_frequency(&mut g, i, sep, plan, rng);
                }
                _ => g.shuffle(rng),
            }
        }
        op += 1;
        out.push(g);
    }
    out
}

/// Uniform crossover: each gene from `a` or `b` with probability 1/2.
pub fn crossover<R: Rng + ?Sized>(a: &[u32], b: &[u32], rng: &mut R) -> Result<Vec<u32>> {
    if a.len() != b.len() {
        return Err(FapError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y }).collect())
}

/// Merges a uniformly chosen used index (never the highest) into the next
/// higher used index. Identity when fewer than two indices are used.
pub fn mutate<R: Rng + ?Sized>(genome: &mut [u32], rng: &mut R) {
    let used: Vec<u32> = usage(genome).into_iter().map(|(k, _)| k).collect();
    if used.len() < 2 {
        return;
    }
    let pick = rng.gen_range(0..used.len() - 1);
    merge_up(genome, used[pick]);
}

/// Re-points every link on index `from` to the next higher used index.
/// No-op when `from` is unused or already the highest.
pub fn merge_up(genome: &mut [u32], from: u32) {
    let Some(to) = genome.iter().copied().filter(|&k| k > from).min() else {
        return;
    };
    for k in genome.iter_mut() {
        if *k == from {
            *k = to;
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub pool: SolutionPool,
    /// Best fitness in the population after initialisation and after each
    /// generation.
    pub best_fitness: Vec<f64>,
    pub best: Individual,
}

/// Generational loop with elitism. Returns every feasible individual seen
/// (the seed solution first).
pub fn run_ga(
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    seed_solution: &Assignment,
    config: &GaConfig,
) -> Result<GaOutcome> {
    config.validate()?;
    if seed_solution.len() != sep.len() {
        return Err(FapError::LengthMismatch(seed_solution.len(), sep.len()));
    }
    let seed_metrics = check_feasibility(seed_solution, sep, plan, config.range_cap);
    if !seed_metrics.feasible {
        return Err(FapError::InvalidParameters(format!(
            "seed solution is infeasible ({} failing links)",
            seed_metrics.fail_count
        )));
    }
    let mut pool = SolutionPool::new(config.balancing_factor);
    pool.insert(seed_solution.clone(), sep, plan, config.range_cap, config.seed, "seed");

    let evaluate = |genomes: Vec<Vec<u32>>| -> Vec<Individual> {
        genomes
            .into_par_iter()
            .map(|g| Individual::evaluate(g, sep, plan, config.modifier, config.range_cap))
            .collect()
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(split_seed(config.seed, 0));
    let mut population = evaluate(init_population(seed_solution, config, sep, plan, &mut init_rng));
    let admit = |pool: &mut SolutionPool, pop: &[Individual], gen: usize| {
        for ind in pop.iter().filter(|i| i.feasible) {
            pool.insert(Assignment::new(ind.genome.clone()), sep, plan, config.range_cap, gen as u64, "ga");
        }
    };
    admit(&mut pool, &population, 0);
    population.sort_by(Individual::compare);
    let mut best_fitness = vec![population[0].fitness];

    let n_elite = config.elite_count();
    for gen in 1..=config.generations {
        let elites = &population[..n_elite];
        let children: Vec<Vec<u32>> = (n_elite..config.population)
            .into_par_iter()
            .map(|slot| {
                let stream = ((gen as u64) << 32) | slot as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(config.seed, stream));
                let a = &elites[rng.gen_range(0..elites.len())];
                let b = &elites[rng.gen_range(0..elites.len())];
                let mut child = crossover(&a.genome, &b.genome, &mut rng).expect("equal genome lengths");
                if rng.gen_bool(config.mutation_rate) {
                    mutate(&mut child, &mut rng);
                }
                child
            })
            .collect();
        let offspring = evaluate(children);
        admit(&mut pool, &offspring, gen);
        let mut next: Vec<Individual> = population[..n_elite].to_vec();
        next.extend(offspring);
        next.sort_by(Individual::compare);
        population = next;
        best_fitness.push(population[0].fitness);
    }
    Ok(GaOutcome { pool, best_fitness, best: population.swap_remove(0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::mock::StepRng;

    fn plan(n_f: u32) -> FrequencyPlan {
        FrequencyPlan::new(0.0, n_f as f64, 1.0, 1.0).unwrap()
    }

    fn triangle(w: u32) -> SeparationMatrix {
        SeparationMatrix::from_quantized(vec![0, 1, 2], 1.0, &[vec![0, w, w], vec![w, 0, w], vec![w, w, 0]])
    }

    #[test]
    fn fitness_examples() {
        let p = plan(20);
        assert_eq!(fitness(&[1, 1, 1], &triangle(2), &p, 1.0), 4.0);
        assert_eq!(fitness(&[1, 3, 5], &triangle(2), &p, 1.0), 3.0);
        // |A| = 3, one broken pair: N_fail = 2
        assert_eq!(fitness(&[1, 2, 5], &triangle(2), &p, 1.0), 3.0 * 3.0);
        assert_eq!(fitness(&[1, 1, 5], &triangle(2), &p, 2.0), 2.0 * 4.0);
    }

    #[test]
    fn swap_is_an_involution() {
        let mut g = vec![1, 5, 9, 2];
        swap(&mut g, 0, 2);
        swap(&mut g, 0, 2);
        assert_eq!(g, vec![1, 5, 9, 2]);
    }

    #[test]
    fn mutate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = vec![1, 5, 1];
        mutate(&mut g, &mut rng);
        assert_eq!(g, vec![5, 5, 5]);
        let mut g = vec![7, 7];
        mutate(&mut g, &mut rng);
        assert_eq!(g, vec![7, 7]);
        let mut g = vec![2, 4, 9, 4];
        merge_up(&mut g, 4);
        assert_eq!(g, vec![2, 9, 9, 9]);
        let mut seen: Vec<u32> = Vec::new();
        for &k in &g {
            if !seen.contains(&k) {
                seen.push(k);
            }
        }
        seen.sort();
        assert_eq!(seen, vec![2, 9]);
        merge_up(&mut g, 9);
        assert_eq!(g, vec![2, 9, 9, 9]);
    }

    #[test]
    fn crossover_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = vec![1, 2, 3, 4];
        assert_eq!(crossover(&a, &a, &mut rng).unwrap(), a);
        let b = vec![5, 6, 7, 8];
        let c = crossover(&a, &b, &mut rng).unwrap();
        assert!(c.iter().zip(a.iter().zip(&b)).all(|(x, (y, z))| x == y || x == z));
        assert!(matches!(crossover(&a, &b[..3], &mut rng), Err(FapError::LengthMismatch(4, 3))));
        // a generator always yielding zero picks the first parent
        assert_eq!(crossover(&a, &b, &mut StepRng::new(0, 0)).unwrap(), a);
    }

    #[test]
    fn add_frequency_output_is_feasible() {
        let s = triangle(2);
        let p = plan(12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut g = vec![1, 3, 5];
            if add_frequency(&mut g, 1, &s, &p, &mut rng) {
                assert!(![1, 3, 5].contains(&g[1]));
                assert!(check_feasibility(&Assignment::new(g), &s, &p, None).feasible);
            }
        }
    }

    #[test]
    fn population_of_one_is_the_seed() {
        let cfg = GaConfig { population: 1, elite_fraction: 1.0, ..GaConfig::default() };
        let seed = Assignment::new(vec![1, 3, 5]);
        let pop = init_population(&seed, &cfg, &triangle(2), &plan(12), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(pop, vec![vec![1, 3, 5]]);
    }

    #[test]
    fn zero_generations_returns_the_seed() {
        let cfg = GaConfig { population: 1, generations: 0, elite_fraction: 1.0, ..GaConfig::default() };
        let seed = Assignment::new(vec![1, 3, 5]);
        let out = run_ga(&triangle(2), &plan(12), &seed, &cfg).unwrap();
        assert_eq!(out.pool.len(), 1);
        assert_eq!(out.pool.entries()[0].assignment, seed);
    }

    #[test]
    fn run_is_elitist_and_deterministic() {
        let s = SeparationMatrix::from_quantized(
            vec![0, 1, 2, 3, 4],
            1.0,
            &[
                vec![0, 3, 0, 2, 0],
                vec![3, 0, 2, 0, 1],
                vec![0, 2, 0, 4, 0],
                vec![2, 0, 4, 0, 2],
                vec![0, 1, 0, 2, 0],
            ],
        );
        let p = plan(30);
        let seed = Assignment::new(vec![1, 10, 1, 20, 1]);
        let cfg = GaConfig { population: 20, generations: 30, seed: 11, ..GaConfig::default() };
        let a = run_ga(&s, &p, &seed, &cfg).unwrap();
        let b = run_ga(&s, &p, &seed, &cfg).unwrap();
        assert_eq!(a.pool.entries(), b.pool.entries());
        assert!(a.best_fitness.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.pool.contains(&seed));
        for e in a.pool.entries() {
            assert!(check_feasibility(&e.assignment, &s, &p, None).feasible);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        assert!(GaConfig { elite_fraction: 0.01, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { modifier: 0.0, ..GaConfig::default() }.validate().is_err());
        assert!(GaConfig { mutation_rate: 1.5, ..GaConfig::default() }.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mutate_drops_exactly_one_used_index(
                genome in proptest::collection::vec(1u32..30, 1..20),
                seed in any::<u64>(),
            ) {
                let before: std::collections::BTreeSet<u32> = genome.iter().copied().collect();
                let mut g = genome.clone();
                mutate(&mut g, &mut ChaCha8Rng::seed_from_u64(seed));
                let after: std::collections::BTreeSet<u32> = g.iter().copied().collect();
                if before.len() >= 2 {
                    prop_assert_eq!(after.len(), before.len() - 1);
                    prop_assert!(after.is_subset(&before));
                    prop_assert_eq!(after.last(), before.last());
                } else {
                    prop_assert_eq!(g, genome);
                }
            }
        }
    }
}
