//! Exhaustive search over every assignment of the unpinned vertices.
//!
//! Assignments are visited in lexicographic order of the gene vector, so the
//! first minimum found is the one returned. With pruning enabled the search
//! skips prefixes that already violate a constraint, prefixes whose partial
//! makespan cannot beat the incumbent, and relabelings of interchangeable
//! edge devices. None of these can change the returned optimum; with pruning
//! disabled exactly `|R|^n` assignments are evaluated.

use std::time::{Duration, Instant};

use thiserror::Error;

use super::Solution;
use crate::placement::{PlacementError, Problem, Scratch, UNASSIGNED};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfOptions {
    pub prune: bool,
    pub budget: Option<Duration>,
}

impl Default for BfOptions {
    fn default() -> Self {
        BfOptions {
            prune: true,
            budget: None,
        }
    }
}

impl BfOptions {
    pub fn exhaustive() -> Self {
        BfOptions {
            prune: false,
            budget: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfOutcome {
    pub best: Solution,
    /// Complete assignments evaluated.
    pub evaluations: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Error, Clone)]
pub enum BfError {
    #[error("no assignment satisfies the constraints ({evaluations} evaluated)")]
    Infeasible { evaluations: u64 },
    #[error("search budget exhausted after {evaluations} evaluations")]
    BudgetExceeded {
        best: Option<Box<Solution>>,
        evaluations: u64,
    },
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

struct Search<'p, 'a> {
    problem: &'p Problem<'a>,
    opts: BfOptions,
    assignment: Vec<usize>,
    scratch: Scratch,
    best: Option<(f64, Vec<usize>)>,
    evaluations: u64,
    nodes: u64,
    started: Instant,
    out_of_time: bool,
    /// First edge index not hosting a source; edges from here on are
    /// interchangeable when the pool is homogeneous.
    first_free_edge: usize,
    symmetric: bool,
}

impl Search<'_, '_> {
    fn over_budget(&mut self) -> bool {
        if self.out_of_time {
            return true;
        }
        self.nodes += 1;
        if let Some(b) = self.opts.budget {
            if self.nodes % 1024 == 0 && self.started.elapsed() > b {
                self.out_of_time = true;
            }
        }
        self.out_of_time
    }

    fn leaf(&mut self) {
        self.evaluations += 1;
        let a = self.problem.assess(&self.assignment, 1.0, &mut self.scratch);
        if a.valid() && self.best.as_ref().map_or(true, |(l, _)| a.makespan < *l) {
            self.best = Some((a.makespan, self.assignment.clone()));
        }
    }

    /// Assigns the unpinned vertex at `depth`; `opened` counts free edges in use.
    fn descend(&mut self, depth: usize, opened: usize) {
        if self.over_budget() {
            return;
        }
        let unpinned = self.problem.unpinned();
        if depth == unpinned.len() {
            self.leaf();
            return;
        }
        let v = unpinned[depth];
        let edges = self.problem.pool.edge_count();
        for r in 0..self.problem.resource_count() {
            let mut now_open = opened;
            if self.symmetric && r >= self.first_free_edge && r < edges {
                let rank = r - self.first_free_edge;
                if rank > opened {
                    continue;
                }
                now_open = opened.max(rank + 1);
            }
            self.assignment[v] = r;
            if self.opts.prune && depth + 1 < unpinned.len() {
                let a = self.problem.assess(&self.assignment, 1.0, &mut self.scratch);
                let dominated = self.best.as_ref().is_some_and(|(l, _)| a.makespan >= *l);
                if !a.valid() || dominated {
                    continue;
                }
            }
            self.descend(depth + 1, now_open);
            if self.out_of_time {
                break;
            }
        }
        self.assignment[v] = UNASSIGNED;
    }
}

/// Minimum-makespan valid placement by enumeration.
pub fn solve_bf(problem: &Problem<'_>, opts: BfOptions) -> Result<BfOutcome, BfError> {
    let started = Instant::now();
    let pool = problem.pool;
    let mut search = Search {
        problem,
        opts,
        assignment: problem.pinned_assignment().to_vec(),
        scratch: Scratch::default(),
        best: None,
        evaluations: 0,
        nodes: 0,
        started,
        out_of_time: false,
        first_free_edge: problem.dag.sources().len().min(pool.edge_count()),
        symmetric: opts.prune && pool.homogeneous_edges(),
    };
    let root_ok = !opts.prune || {
        let a = problem.assess(&search.assignment, 1.0, &mut search.scratch);
        a.valid() || problem.unpinned().is_empty()
    };
    if root_ok {
        search.descend(0, 0);
    }

    let evaluations = search.evaluations;
    let best = match search.best {
        Some((_, assignment)) => {
            let placement = crate::placement::Placement { assignment };
            let evaluation = problem.evaluate(&placement)?;
            Some(Solution { placement, evaluation })
        }
        None => None,
    };
    if search.out_of_time {
        return Err(BfError::BudgetExceeded {
            best: best.map(Box::new),
            evaluations,
        });
    }
    match best {
        Some(best) => Ok(BfOutcome {
            best,
            evaluations,
            elapsed: started.elapsed(),
        }),
        None => Err(BfError::Infeasible { evaluations }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::tests::{chain, filter};
    use crate::placement::tests::{link, uniform_scenario};
    use crate::placement::Placement;
    use crate::profiles::Overheads;
    use crate::resources::{EnergyConfig, ResourcePool};
    use crate::scenario::VertexParams;

    fn params(edge: f64, cloud: f64) -> VertexParams {
        VertexParams {
            lambda_edge: edge,
            lambda_cloud: cloud,
            epsilon_edge: 0.0,
        }
    }

    #[test]
    fn two_candidate_resources() {
        // src -> q -> t with one edge and one VM. On the edge q costs its own
        // compute plus the hop (0.060); on the VM it shares the VM with t, so
        // the hop plus both computes (0.052).
        let dag = chain(&[filter(1.0), filter(1.0)]);
        let sc = uniform_scenario(&dag, 10.0, params(0.010, 0.001), link(0.005, 0.05));
        let pool = ResourcePool::new(1, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        let out = solve_bf(&pb, BfOptions::exhaustive()).unwrap();
        assert_eq!(out.evaluations, 2);
        assert_eq!(out.best.placement, Placement { assignment: vec![0, 1, 1] });
        assert!((out.best.makespan() - 0.052).abs() < 1e-9);
    }

    #[test]
    fn enumeration_count_is_exact() {
        let dag = chain(&[filter(1.0), filter(1.0), filter(1.0), filter(1.0)]);
        let sc = uniform_scenario(&dag, 10.0, params(1e-5, 4e-6), link(0.005, 0.05));
        let pool = ResourcePool::new(3, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        assert_eq!(pb.unpinned().len(), 3);
        let full = solve_bf(&pb, BfOptions::exhaustive()).unwrap();
        assert_eq!(full.evaluations, 64);
        let pruned = solve_bf(&pb, BfOptions::default()).unwrap();
        assert!(pruned.evaluations < 64);
        assert_eq!(pruned.best.placement, full.best.placement);
    }

    #[test]
    fn infeasible_when_every_assignment_violates() {
        // Every query far above both classes' capacity.
        let dag = chain(&[filter(1.0), filter(1.0)]);
        let sc = uniform_scenario(&dag, 1e6, params(1e-5, 4e-6), link(0.005, 0.05));
        let pool = ResourcePool::new(2, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        for opts in [BfOptions::exhaustive(), BfOptions::default()] {
            match solve_bf(&pb, opts) {
                Err(BfError::Infeasible { .. }) => {}
                other => panic!("expected infeasible, got {other:?}"),
            }
        }
        let err = solve_bf(&pb, BfOptions::exhaustive()).unwrap_err();
        assert!(matches!(err, BfError::Infeasible { evaluations: 3 }));
    }

    #[test]
    fn energy_bound_infeasibility() {
        // Energy over budget on every edge and throughput over capacity on
        // the VM: no valid assignment.
        let dag = chain(&[filter(1.0), filter(1.0), filter(1.0)]);
        let mut p = params(1e-6, 1e-3);
        p.epsilon_edge = 1.0;
        let sc = uniform_scenario(&dag, 2000.0, p, link(0.005, 0.05));
        let pool = ResourcePool::new(3, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        assert!(matches!(
            solve_bf(&pb, BfOptions::exhaustive()),
            Err(BfError::Infeasible { evaluations: 16 })
        ));
    }

    #[test]
    fn zero_budget_reports_best_so_far() {
        let queries: Vec<_> = (0..9).map(|_| filter(1.0)).collect();
        let dag = chain(&queries);
        let sc = uniform_scenario(&dag, 10.0, params(1e-5, 4e-6), link(0.005, 0.05));
        let pool = ResourcePool::new(9, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        let opts = BfOptions {
            prune: false,
            budget: Some(Duration::from_millis(1)),
        };
        match solve_bf(&pb, opts) {
            Err(BfError::BudgetExceeded { evaluations, .. }) => assert!(evaluations < 10u64.pow(8)),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn no_unpinned_vertices() {
        let dag = chain(&[filter(1.0)]);
        let sc = uniform_scenario(&dag, 10.0, params(1e-5, 4e-6), link(0.005, 0.05));
        let pool = ResourcePool::new(1, 1, EnergyConfig::default());
        let pb = Problem::new(&dag, &sc, &pool, Overheads::default()).unwrap();
        let out = solve_bf(&pb, BfOptions::exhaustive()).unwrap();
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.best.placement.assignment, vec![0, 1]);
    }
}
