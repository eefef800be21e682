//! Genetic-algorithm placement.
//!
//! A chromosome holds one resource index per unpinned vertex. Each generation
//! applies selection, single-point crossover and per-gene mutation to the
//! whole population; there is no elitism inside the population. The best-fit
//! chromosome is tracked outside it and compared lexicographically on
//! (valid, fitness), so a valid solution is never displaced by an invalid one.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Solution;
use crate::placement::{Assessment, PlacementError, Problem, Scratch};

/// Fitness never drops below this, so roulette probabilities stay defined.
pub const FITNESS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Roulette,
    /// Linear ranking.
    Rank,
    /// Binary tournament.
    Tournament,
}

impl std::str::FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "roulette" => Ok(Selection::Roulette),
            "rank" => Ok(Selection::Rank),
            "tournament" => Ok(Selection::Tournament),
            _ => Err(format!("unknown selection `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub min_generations: u64,
    pub max_generations: u64,
    /// Stop once the best fitness has not improved over this trailing
    /// fraction of the generations run so far.
    pub convergence_window_frac: f64,
    /// Improvements not exceeding this are treated as no change.
    pub convergence_tolerance: f64,
    /// Large constant K (seconds) from which the makespan is subtracted.
    pub fitness_constant: f64,
    pub penalty_gamma: f64,
    /// Penalize each violating resource instead of each violated constraint class.
    pub per_violation_penalty: bool,
    pub selection: Selection,
    /// Selection pressure of linear ranking, in [1, 2].
    pub rank_pressure: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            crossover_prob: 0.5,
            mutation_prob: 0.15,
            min_generations: 15_000,
            max_generations: 1_000_000,
            convergence_window_frac: 0.5,
            convergence_tolerance: 0.0,
            fitness_constant: 1000.0,
            penalty_gamma: 1.5,
            per_violation_penalty: false,
            selection: Selection::Roulette,
            rank_pressure: 1.5,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn check(&self) -> Result<(), String> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.population < 2 {
            return Err("population must be at least 2".into());
        }
        if !prob(self.crossover_prob) || !prob(self.mutation_prob) {
            return Err("crossover and mutation probabilities must lie in [0, 1]".into());
        }
        if self.min_generations > self.max_generations {
            return Err("min_generations exceeds max_generations".into());
        }
        if !prob(self.convergence_window_frac) {
            return Err("convergence window must lie in [0, 1]".into());
        }
        if !(1.0..=2.0).contains(&self.rank_pressure) {
            return Err("rank pressure must lie in [1, 2]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    pub genes: Vec<usize>,
    pub fitness: f64,
    pub valid: bool,
    pub makespan: f64,
    evaluated: bool,
}

impl Chromosome {
    pub fn new(genes: Vec<usize>) -> Self {
        Chromosome {
            genes,
            fitness: 0.0,
            valid: false,
            makespan: f64::INFINITY,
            evaluated: false,
        }
    }

    fn beats(&self, other: &Chromosome, tolerance: f64) -> bool {
        (self.valid && !other.valid)
            || (self.valid == other.valid && self.fitness > other.fitness + tolerance)
    }
}

/// Fitness of an assessed placement: `K − L_G`, minus `log2(1 + γ·(K − L_G))`
/// per violated constraint class (or per violating resource).
pub fn fitness(a: &Assessment, cfg: &GaConfig) -> f64 {
    let raw = cfg.fitness_constant - a.makespan;
    let penalties = if cfg.per_violation_penalty {
        a.violation_count()
    } else {
        a.violated_classes()
    };
    let penalty = if penalties == 0 {
        0.0
    } else {
        penalties as f64 * (1.0 + cfg.penalty_gamma * raw.max(0.0)).log2()
    };
    (raw - penalty).max(FITNESS_FLOOR)
}

/// `population.len()` independent roulette draws. Index `j` is chosen when the
/// uniform draw falls in `(δ_{j−1}, δ_j]` of the cumulative fitness shares.
pub fn roulette_select<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> Vec<usize> {
    let total: f64 = fitness.iter().sum();
    let mut acc = 0.0;
    let cdf: Vec<f64> = fitness
        .iter()
        .map(|f| {
            acc += f / total;
            acc
        })
        .collect();
    draw_from_cdf(&cdf, fitness.len(), rng)
}

fn draw_from_cdf<R: Rng + ?Sized>(cdf: &[f64], draws: usize, rng: &mut R) -> Vec<usize> {
    let last = cdf.len() - 1;
    (0..draws)
        .map(|_| {
            let x: f64 = rng.gen();
            cdf.partition_point(|&d| d < x).min(last)
        })
        .collect()
}

/// Linear-ranking selection probabilities. Equal fitness values share the
/// average of their ranks.
pub fn rank_probabilities(fitness: &[f64], pressure: f64) -> Vec<f64> {
    let p = fitness.len();
    if p == 1 {
        return vec![1.0];
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    let mut rank = vec![0.0; p];
    let mut i = 0;
    while i < p {
        let mut j = i;
        while j + 1 < p && fitness[order[j + 1]] == fitness[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            rank[k] = avg;
        }
        i = j + 1;
    }
    let pf = p as f64;
    rank.iter()
        .map(|&r| (2.0 - pressure) / pf + 2.0 * r * (pressure - 1.0) / (pf * (pf - 1.0)))
        .collect()
}

pub fn rank_select<R: Rng + ?Sized>(fitness: &[f64], pressure: f64, rng: &mut R) -> Vec<usize> {
    let mut acc = 0.0;
    let cdf: Vec<f64> = rank_probabilities(fitness, pressure)
        .into_iter()
        .map(|q| {
            acc += q;
            acc
        })
        .collect();
    draw_from_cdf(&cdf, fitness.len(), rng)
}

/// Binary tournament: the fitter of two uniform picks, the first on ties.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> Vec<usize> {
    let p = fitness.len();
    (0..p)
        .map(|_| {
            let a = rng.gen_range(0..p);
            let b = rng.gen_range(0..p);
            if fitness[b] > fitness[a] {
                b
            } else {
                a
            }
        })
        .collect()
}

/// Single-point crossover. Each chromosome joins the crossover set with
/// probability `chi`; an odd set drops its last member; the rest are paired
/// at random and exchange genes `0..=m` for a uniform point `m`. Returns the
/// indices of chromosomes that took part.
pub fn crossover<R: Rng + ?Sized>(pop: &mut [Vec<usize>], chi: f64, rng: &mut R) -> Vec<usize> {
    let mut set: Vec<usize> = (0..pop.len()).filter(|_| rng.gen_bool(chi)).collect();
    if set.len() % 2 == 1 {
        set.pop();
    }
    set.shuffle(rng);
    for pair in set.chunks_exact(2) {
        let n = pop[pair[0]].len();
        if n == 0 {
            continue;
        }
        let m = rng.gen_range(0..n);
        swap_prefix(pop, pair[0], pair[1], m);
    }
    set
}

fn swap_prefix(pop: &mut [Vec<usize>], i: usize, j: usize, m: usize) {
    let (lo, hi) = (i.min(j), i.max(j));
    let (left, right) = pop.split_at_mut(hi);
    left[lo][..=m].swap_with_slice(&mut right[0][..=m]);
}

/// Replaces each gene with probability `mu` by a uniform resource index.
/// Returns the number of genes redrawn.
pub fn mutate<R: Rng + ?Sized>(pop: &mut [Vec<usize>], mu: f64, resources: usize, rng: &mut R) -> usize {
    let mut redrawn = 0;
    for genes in pop.iter_mut() {
        for g in genes.iter_mut() {
            if rng.gen_bool(mu) {
                *g = rng.gen_range(0..resources);
                redrawn += 1;
            }
        }
    }
    redrawn
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Solution,
    pub generations: u64,
    pub evaluations: u64,
    pub elapsed: Duration,
    /// Best-fit fitness after each generation, generation 0 first.
    pub fitness_trace: Vec<f64>,
}

struct Evaluator<'p, 'a> {
    problem: &'p Problem<'a>,
    cfg: &'p GaConfig,
    scratch: Scratch,
    assignment: Vec<usize>,
    evaluations: u64,
}

impl Evaluator<'_, '_> {
    fn eval(&mut self, c: &mut Chromosome) {
        if c.evaluated {
            return;
        }
        self.problem.expand_into(&c.genes, &mut self.assignment);
        let a = self.problem.assess(&self.assignment, 1.0, &mut self.scratch);
        c.fitness = fitness(&a, self.cfg);
        c.valid = a.valid();
        c.makespan = a.makespan;
        c.evaluated = true;
        self.evaluations += 1;
    }
}

pub fn solve_ga(problem: &Problem<'_>, cfg: &GaConfig) -> Result<GaOutcome, PlacementError> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = problem.unpinned().len();
    let resources = problem.resource_count();
    let p = cfg.population.max(2);
    let mut ev = Evaluator {
        problem,
        cfg,
        scratch: Scratch::default(),
        assignment: Vec::new(),
        evaluations: 0,
    };

    let mut pop: Vec<Chromosome> = (0..p)
        .map(|_| Chromosome::new((0..n).map(|_| rng.gen_range(0..resources)).collect()))
        .collect();
    for c in pop.iter_mut() {
        ev.eval(c);
    }
    let mut best = pop[0].clone();
    for c in &pop[1..] {
        if c.beats(&best, 0.0) {
            best = c.clone();
        }
    }
    let mut trace = vec![best.fitness];
    let mut generation = 0u64;
    let mut last_improved = 0u64;

    // A single point in the search space needs no evolution.
    let trivial = n == 0;
    let mut genes: Vec<Vec<usize>> = vec![Vec::with_capacity(n); p];
    let mut scores = vec![0.0; p];
    while !trivial {
        for (s, c) in scores.iter_mut().zip(&pop) {
            *s = c.fitness;
        }
        let chosen = match cfg.selection {
            Selection::Roulette => roulette_select(&scores, &mut rng),
            Selection::Rank => rank_select(&scores, cfg.rank_pressure, &mut rng),
            Selection::Tournament => tournament_select(&scores, &mut rng),
        };
        let mut next: Vec<Chromosome> = chosen.iter().map(|&i| pop[i].clone()).collect();
        for (g, c) in genes.iter_mut().zip(&next) {
            g.clone_from(&c.genes);
        }
        crossover(&mut genes, cfg.crossover_prob, &mut rng);
        mutate(&mut genes, cfg.mutation_prob, resources, &mut rng);
        for (c, g) in next.iter_mut().zip(&genes) {
            if c.genes != *g {
                c.genes.clone_from(g);
                c.evaluated = false;
            }
            ev.eval(c);
        }
        pop = next;
        generation += 1;

        for c in &pop {
            if c.beats(&best, cfg.convergence_tolerance) {
                best = c.clone();
                last_improved = generation;
            } else if c.beats(&best, 0.0) {
                best = c.clone();
            }
        }
        trace.push(best.fitness);

        let stale = (generation - last_improved) as f64;
        let converged = generation >= cfg.min_generations
            && stale >= cfg.convergence_window_frac * generation as f64;
        if converged || generation >= cfg.max_generations {
            break;
        }
    }

    let placement = problem.expand(&best.genes);
    let evaluation = problem.evaluate(&placement)?;
    Ok(GaOutcome {
        best: Solution {
            placement,
            evaluation,
        },
        generations: generation,
        evaluations: ev.evaluations,
        elapsed: started.elapsed(),
        fitness_trace: trace,
    })
}
