//! Baseline placements: best of uniformly random trials, and everything on
//! the VM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::Solution;
use crate::placement::{PlacementError, Problem, Scratch};

pub const DEFAULT_TRIALS: usize = 15_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("none of {trials} random placements is valid")]
    Infeasible { trials: usize },
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

/// Draws `trials` uniform assignments and keeps the valid one with the lowest
/// makespan; the earliest trial wins ties.
pub fn solve_random(problem: &Problem<'_>, trials: usize, seed: u64) -> Result<Solution, BaselineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.unpinned().len();
    let resources = problem.resource_count();
    let mut scratch = Scratch::default();
    let mut genes = vec![0; n];
    let mut assignment = Vec::new();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..trials {
        for g in genes.iter_mut() {
            *g = rng.gen_range(0..resources);
        }
        problem.expand_into(&genes, &mut assignment);
        let a = problem.assess(&assignment, 1.0, &mut scratch);
        if a.valid() && best.as_ref().map_or(true, |(l, _)| a.makespan < *l) {
            best = Some((a.makespan, genes.clone()));
        }
    }
    let (_, genes) = best.ok_or(BaselineError::Infeasible { trials })?;
    let placement = problem.expand(&genes);
    let evaluation = problem.evaluate(&placement)?;
    Ok(Solution { placement, evaluation })
}

/// Sources stay on their edge devices; every other vertex goes to the VM.
/// The result may be invalid.
pub fn solve_cloud_only(problem: &Problem<'_>) -> Result<Solution, PlacementError> {
    let placement = problem.cloud_only();
    let evaluation = problem.evaluate(&placement)?;
    Ok(Solution { placement, evaluation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::tests::{chain, filter};
    use crate::placement::tests::{link, uniform_scenario};
    use crate::profiles::Overheads;
    use crate::resources::{EnergyConfig, ResourcePool};
    use crate::scenario::VertexParams;
    use crate::solver::bf::{solve_bf, BfOptions};

    fn params(edge: f64, cloud: f64) -> VertexParams {
        VertexParams {
            lambda_edge: edge,
            lambda_cloud: cloud,
            epsilon_edge: 0.0,
        }
    }

    #[test]
    fn covers_small_spaces() {
        let dag = chain(&[filter(1.0), filter(1.0), filter(1.0), filter(1.0)]);
        let sc = uniform_scenario(&dag, 10.0, params(2e-3, 1e-3), link(0.005, 0.05));
        let pool = ResourcePool::new(3, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        let rnd = solve_random(&pb, DEFAULT_TRIALS, 4).unwrap();
        let bf = solve_bf(&pb, BfOptions::exhaustive()).unwrap();
        assert_eq!(rnd.makespan(), bf.best.makespan());
        assert_eq!(solve_random(&pb, DEFAULT_TRIALS, 4).unwrap(), rnd);
    }

    #[test]
    fn infeasible_pool() {
        let dag = chain(&[filter(1.0), filter(1.0)]);
        let sc = uniform_scenario(&dag, 1e6, params(1e-5, 4e-6), link(0.005, 0.05));
        let pool = ResourcePool::new(2, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        assert_eq!(
            solve_random(&pb, 100, 0).unwrap_err(),
            BaselineError::Infeasible { trials: 100 }
        );
    }

    #[test]
    fn cloud_only_keeps_sources_on_edges() {
        let dag = chain(&[filter(1.0), filter(1.0), filter(1.0)]);
        let sc = uniform_scenario(&dag, 10.0, params(1e-4, 1e-5), link(0.005, 0.05));
        let pool = ResourcePool::new(2, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        let co = solve_cloud_only(&pb).unwrap();
        assert_eq!(co.placement.assignment, vec![0, 2, 2, 2]);
        // One edge-to-cloud hop, then three cloud computes minus the sink.
        assert!((co.makespan() - (0.05 + 2.0 * 3.0 * 1e-5)).abs() < 1e-9, "{}", co.makespan());
        assert!(co.valid());
    }
}
