//! Placement evaluation: makespan, throughput and energy constraints, and
//! input-rate headroom.
//!
//! A [`Problem`] bundles everything a solver needs: the DAG, one sampled
//! scenario, the resource pool and the parallelism-overhead fits. Sources are
//! pinned round-robin onto edge devices and sinks onto the first VM, so the
//! decision variables are the resources of the remaining (unpinned) vertices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::QueryDag;
use crate::profiles::{Overheads, ResourceClass};
use crate::resources::ResourcePool;
use crate::scenario::RuntimeScenario;

/// Marker for a vertex without a resource in a partial assignment.
pub const UNASSIGNED: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("vertex `{0}` is not placed")]
    Unplaced(String),
    #[error("vertex `{vertex}` placed on unknown resource #{resource}")]
    UnknownResource { vertex: String, resource: usize },
    #[error("source `{0}` must be placed on an edge device")]
    SourceNotOnEdge(String),
    #[error("sink `{0}` must be placed on a cloud VM")]
    SinkNotOnCloud(String),
    #[error("assignment has {got} entries, DAG has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pool has no edge device to host the sources")]
    NoEdgeDevice,
    #[error("scenario does not match the DAG")]
    ScenarioMismatch,
    #[error("placement is not valid at the base input rate")]
    InvalidBase,
}

/// The mapping from vertices to resource indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    Throughput,
    Energy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub resource: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceLoad {
    pub resource: String,
    /// Non-source queries hosted.
    pub queries: usize,
    /// Charge drawn over one recharge period, base load included (edges only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consumed_energy_mah: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// End-to-end latency L_G in seconds.
    pub makespan: f64,
    pub critical_path: Vec<usize>,
    pub violations: Vec<Violation>,
    pub per_resource: Vec<ResourceLoad>,
    pub valid: bool,
}

impl Evaluation {
    pub fn makespan_ms(&self) -> f64 {
        self.makespan * 1e3
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    /// JSON view with the makespan in milliseconds and vertex/resource ids.
    pub fn report(&self, dag: &QueryDag, placement: &Placement, pool: &ResourcePool) -> serde_json::Value {
        serde_json::json!({
            "makespan_ms": self.makespan_ms(),
            "valid": self.valid,
            "critical_path": self.critical_path.iter().map(|&v| dag.vertex(v).id.as_str()).collect::<Vec<_>>(),
            "violations": self.violations,
            "per_resource": self.per_resource,
            "assignment": dag.vertices().iter().zip(&placement.assignment)
                .map(|(v, &r)| (v.id.clone(), pool.id(r).to_string()))
                .collect::<std::collections::BTreeMap<_, _>>(),
        })
    }
}

/// Compact evaluation used inside solver loops.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Assessment {
    pub makespan: f64,
    /// Resources with at least one throughput violation.
    pub throughput_violations: usize,
    /// Edge devices over their energy budget.
    pub energy_violations: usize,
}

impl Assessment {
    pub fn valid(&self) -> bool {
        self.throughput_violations == 0 && self.energy_violations == 0
    }

    /// Number of violated constraint classes (0, 1 or 2).
    pub fn violated_classes(&self) -> usize {
        usize::from(self.throughput_violations > 0) + usize::from(self.energy_violations > 0)
    }

    pub fn violation_count(&self) -> usize {
        self.throughput_violations + self.energy_violations
    }
}

/// Reusable buffers for [`Problem::assess`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    lambda_sum: Vec<f64>,
    count: Vec<usize>,
    energy: Vec<f64>,
    occupied: Vec<bool>,
    violated: Vec<bool>,
    dist: Vec<f64>,
    pred: Vec<usize>,
}

impl Scratch {
    fn reset(&mut self, resources: usize, vertices: usize) {
        self.lambda_sum.clear();
        self.lambda_sum.resize(resources, 0.0);
        self.count.clear();
        self.count.resize(resources, 0);
        self.energy.clear();
        self.energy.resize(resources, 0.0);
        self.occupied.clear();
        self.occupied.resize(resources, false);
        self.violated.clear();
        self.violated.resize(resources, false);
        self.dist.clear();
        self.dist.resize(vertices, 0.0);
        self.pred.clear();
        self.pred.resize(vertices, UNASSIGNED);
    }
}

#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub dag: &'a QueryDag,
    pub scenario: &'a RuntimeScenario,
    pub pool: &'a ResourcePool,
    pub overheads: Overheads,
    /// Add the sink's own compute latency to each path.
    pub include_sink_compute: bool,
    unpinned: Vec<usize>,
    pinned: Vec<usize>,
    class: Vec<ResourceClass>,
}

impl<'a> Problem<'a> {
    pub fn new(
        dag: &'a QueryDag,
        scenario: &'a RuntimeScenario,
        pool: &'a ResourcePool,
        overheads: Overheads,
    ) -> Result<Self, PlacementError> {
        if pool.edge_count() == 0 {
            return Err(PlacementError::NoEdgeDevice);
        }
        if scenario.vertices.len() != dag.len() || scenario.links.len() != dag.edges().len() {
            return Err(PlacementError::ScenarioMismatch);
        }
        let mut pinned = vec![UNASSIGNED; dag.len()];
        for (i, &s) in dag.sources().iter().enumerate() {
            pinned[s] = i % pool.edge_count();
        }
        for &s in dag.sinks() {
            pinned[s] = pool.cloud(0);
        }
        Ok(Problem {
            dag,
            scenario,
            pool,
            overheads,
            include_sink_compute: false,
            unpinned: dag.unpinned(),
            pinned,
            class: (0..pool.len()).map(|r| pool.class(r)).collect(),
        })
    }

    pub fn with_sink_compute(mut self, include: bool) -> Self {
        self.include_sink_compute = include;
        self
    }

    /// Unpinned vertices in gene order.
    pub fn unpinned(&self) -> &[usize] {
        &self.unpinned
    }

    /// Assignment with sources and sinks pinned and everything else
    /// [`UNASSIGNED`].
    pub fn pinned_assignment(&self) -> &[usize] {
        &self.pinned
    }

    pub fn resource_count(&self) -> usize {
        self.pool.len()
    }

    /// Full assignment from one resource index per unpinned vertex.
    pub fn expand(&self, genes: &[usize]) -> Placement {
        let mut assignment = self.pinned.clone();
        self.expand_into(genes, &mut assignment);
        Placement { assignment }
    }

    pub fn expand_into(&self, genes: &[usize], assignment: &mut Vec<usize>) {
        debug_assert_eq!(genes.len(), self.unpinned.len());
        assignment.clear();
        assignment.extend_from_slice(&self.pinned);
        for (&v, &r) in self.unpinned.iter().zip(genes) {
            assignment[v] = r;
        }
    }

    /// Placement with every unpinned vertex on the first VM.
    pub fn cloud_only(&self) -> Placement {
        self.expand(&vec![self.pool.cloud(0); self.unpinned.len()])
    }

    /// Checks that a placement is complete and honours the pinning rule.
    pub fn check_placement(&self, p: &Placement) -> Result<(), PlacementError> {
        let dag = self.dag;
        if p.assignment.len() != dag.len() {
            return Err(PlacementError::LengthMismatch {
                expected: dag.len(),
                got: p.assignment.len(),
            });
        }
        for (v, &r) in p.assignment.iter().enumerate() {
            let id = || dag.vertex(v).id.clone();
            if r == UNASSIGNED {
                return Err(PlacementError::Unplaced(id()));
            }
            if r >= self.pool.len() {
                return Err(PlacementError::UnknownResource {
                    vertex: id(),
                    resource: r,
                });
            }
            if dag.is_source(v) && !self.pool.is_edge(r) {
                return Err(PlacementError::SourceNotOnEdge(id()));
            }
            if dag.is_sink(v) && self.pool.is_edge(r) {
                return Err(PlacementError::SinkNotOnCloud(id()));
            }
        }
        Ok(())
    }

    fn lambda(&self, v: usize, r: usize) -> f64 {
        self.scenario.vertices[v].lambda(self.class[r])
    }

    /// Network cost of DAG edge `e` between resources `ra` and `rb`.
    fn transfer(&self, e: usize, ra: usize, rb: usize) -> f64 {
        if ra == rb {
            return 0.0;
        }
        let link = &self.scenario.links[e];
        let bits = self.dag.vertex(self.dag.edges()[e].0).out_event_size() * 8.0;
        match (self.class[ra], self.class[rb]) {
            (ResourceClass::Edge, ResourceClass::Edge) => link.latency_ee + bits / link.bandwidth_ee,
            (ResourceClass::Cloud, ResourceClass::Cloud) => 0.0,
            _ => link.latency_ec + bits / link.bandwidth_ec,
        }
    }

    /// Makespan and violation counts at the scenario's rates multiplied by
    /// `rate_scale`. Entries equal to [`UNASSIGNED`] are skipped, which gives
    /// a lower bound on the makespan and violations of any completion.
    pub fn assess(&self, assignment: &[usize], rate_scale: f64, s: &mut Scratch) -> Assessment {
        let dag = self.dag;
        let n = dag.len();
        s.reset(self.pool.len(), n);
        let rates = &self.scenario.rates.omega_in;

        for v in 0..n {
            let r = assignment[v];
            if r == UNASSIGNED {
                continue;
            }
            s.occupied[r] = true;
            if dag.is_source(v) {
                continue;
            }
            s.lambda_sum[r] += self.lambda(v, r);
            s.count[r] += 1;
            if self.pool.is_edge(r) {
                s.energy[r] += rates[v] * rate_scale * self.scenario.vertices[v].epsilon_edge;
            }
        }

        let mut throughput_violations = 0;
        for v in 0..n {
            let r = assignment[v];
            if r == UNASSIGNED || dag.is_source(v) || s.violated[r] {
                continue;
            }
            let capacity = self.capacity(r, s.count[r], s.lambda_sum[r]);
            if rates[v] * rate_scale >= capacity {
                s.violated[r] = true;
                throughput_violations += 1;
            }
        }

        let mut energy_violations = 0;
        for (r, edge) in self.pool.edges.iter().enumerate() {
            if s.occupied[r] && self.energy_total(edge, s.energy[r]) > edge.energy.capacity_mah {
                energy_violations += 1;
            }
        }

        let makespan = self.longest_path(assignment, s);
        Assessment {
            makespan,
            throughput_violations,
            energy_violations,
        }
    }

    /// Events/second a query on `r` may receive when `m` queries with summed
    /// per-event latency `lambda_sum` share it.
    fn capacity(&self, r: usize, m: usize, lambda_sum: f64) -> f64 {
        let pi = self.overheads.for_class(self.class[r]).overhead(m);
        (1.0 + pi) / lambda_sum
    }

    /// Consumption over one recharge period given the per-second incremental
    /// draw `per_second` (mAh/s).
    fn energy_total(&self, edge: &crate::resources::EdgeDevice, per_second: f64) -> f64 {
        edge.energy.base_consumption_mah() + per_second * edge.energy.recharge_secs
    }

    /// Longest source-to-sink path by dynamic programming over the topological
    /// order. Leaves predecessors in `s.pred` for critical-path recovery.
    fn longest_path(&self, assignment: &[usize], s: &mut Scratch) -> f64 {
        let dag = self.dag;
        let edges = dag.edges();
        for &v in dag.topo_order() {
            let mut best = 0.0;
            let mut arg = UNASSIGNED;
            for &e in dag.in_edges(v) {
                let u = edges[e].0;
                let (ru, rv) = (assignment[u], assignment[v]);
                let mut term = s.dist[u];
                if ru != UNASSIGNED {
                    if !dag.is_source(u) {
                        term += s.lambda_sum[ru];
                    }
                    if rv != UNASSIGNED {
                        term += self.transfer(e, ru, rv);
                    }
                }
                if arg == UNASSIGNED || term > best {
                    best = term;
                    arg = u;
                }
            }
            s.dist[v] = best;
            s.pred[v] = arg;
        }
        let mut makespan = 0.0;
        for &t in dag.sinks() {
            let mut d = s.dist[t];
            if self.include_sink_compute && assignment[t] != UNASSIGNED {
                d += s.lambda_sum[assignment[t]];
            }
            if d > makespan {
                makespan = d;
            }
        }
        makespan
    }

    /// End-to-end latency and the critical path of a complete placement.
    pub fn end_to_end_latency(&self, p: &Placement) -> Result<(f64, Vec<usize>), PlacementError> {
        self.check_placement(p)?;
        let mut s = Scratch::default();
        let a = self.assess(&p.assignment, 1.0, &mut s);
        Ok((a.makespan, self.critical_path(&p.assignment, &s)))
    }

    fn critical_path(&self, assignment: &[usize], s: &Scratch) -> Vec<usize> {
        let dag = self.dag;
        let sink_total = |t: usize| {
            s.dist[t]
                + if self.include_sink_compute {
                    s.lambda_sum[assignment[t]]
                } else {
                    0.0
                }
        };
        let Some(mut v) = dag
            .sinks()
            .iter()
            .copied()
            .reduce(|a, b| if sink_total(b) > sink_total(a) { b } else { a })
        else {
            return Vec::new();
        };
        let mut path = vec![v];
        while s.pred[v] != UNASSIGNED {
            v = s.pred[v];
            path.push(v);
        }
        path.reverse();
        path
    }

    /// Throughput and energy violations at the given rate multiplier. One
    /// entry per violating resource and constraint.
    pub fn check_constraints(&self, p: &Placement, rate_scale: f64) -> Result<Vec<Violation>, PlacementError> {
        self.check_placement(p)?;
        let mut s = Scratch::default();
        self.assess(&p.assignment, rate_scale, &mut s);
        Ok(self.violations(&p.assignment, rate_scale, &s))
    }

    fn violations(&self, assignment: &[usize], rate_scale: f64, s: &Scratch) -> Vec<Violation> {
        let dag = self.dag;
        let rates = &self.scenario.rates.omega_in;
        let mut out = Vec::new();
        for r in 0..self.pool.len() {
            let over: Vec<String> = (0..dag.len())
                .filter(|&v| assignment[v] == r && !dag.is_source(v))
                .filter(|&v| rates[v] * rate_scale >= self.capacity(r, s.count[r], s.lambda_sum[r]))
                .map(|v| {
                    format!(
                        "{} receives {:.1} e/s, limit {:.1} e/s",
                        dag.vertex(v).id,
                        rates[v] * rate_scale,
                        self.capacity(r, s.count[r], s.lambda_sum[r])
                    )
                })
                .collect();
            if !over.is_empty() {
                out.push(Violation {
                    kind: ViolationKind::Throughput,
                    resource: self.pool.id(r).to_string(),
                    detail: over.join("; "),
                });
            }
        }
        for (r, edge) in self.pool.edges.iter().enumerate() {
            let total = self.energy_total(edge, s.energy[r]);
            if s.occupied[r] && total > edge.energy.capacity_mah {
                out.push(Violation {
                    kind: ViolationKind::Energy,
                    resource: edge.id.clone(),
                    detail: format!(
                        "{total:.1} mAh consumed over {:.0} s, capacity {:.1} mAh",
                        edge.energy.recharge_secs, edge.energy.capacity_mah
                    ),
                });
            }
        }
        out
    }

    /// Full evaluation. The makespan is computed even for invalid placements.
    pub fn evaluate(&self, p: &Placement) -> Result<Evaluation, PlacementError> {
        self.check_placement(p)?;
        let mut s = Scratch::default();
        let a = self.assess(&p.assignment, 1.0, &mut s);
        let violations = self.violations(&p.assignment, 1.0, &s);
        let per_resource = (0..self.pool.len())
            .map(|r| ResourceLoad {
                resource: self.pool.id(r).to_string(),
                queries: s.count[r],
                consumed_energy_mah: self
                    .pool
                    .edges
                    .get(r)
                    .map(|edge| if s.occupied[r] { self.energy_total(edge, s.energy[r]) } else { 0.0 }),
            })
            .collect();
        debug_assert_eq!(a.valid(), violations.is_empty());
        Ok(Evaluation {
            makespan: a.makespan,
            critical_path: self.critical_path(&p.assignment, &s),
            valid: violations.is_empty(),
            violations,
            per_resource,
        })
    }

    /// Largest percentage increase of the DAG input rate that keeps the
    /// placement free of violations, found by bisection to 0.1 % resolution.
    /// Latency does not depend on the rate, so only constraints are rechecked.
    pub fn rate_headroom(&self, p: &Placement) -> Result<f64, PlacementError> {
        const RESOLUTION: f64 = 0.1;
        const CEILING: f64 = 1e9;
        self.check_placement(p)?;
        let mut s = Scratch::default();
        let mut valid_at = |pct: f64| self.assess(&p.assignment, 1.0 + pct / 100.0, &mut s).valid();
        if !valid_at(0.0) {
            return Err(PlacementError::InvalidBase);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while valid_at(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > CEILING {
                return Ok(CEILING);
            }
        }
        while hi - lo > RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if valid_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Edge devices hosting at least one vertex, as a percentage of the pool's
    /// edge devices.
    pub fn edge_used_pct(&self, p: &Placement) -> f64 {
        edge_used_pct(p, self.pool)
    }
}

pub fn edge_used_pct(p: &Placement, pool: &ResourcePool) -> f64 {
    if pool.edge_count() == 0 {
        return 0.0;
    }
    let mut used = vec![false; pool.edge_count()];
    for &r in &p.assignment {
        if r < pool.edge_count() {
            used[r] = true;
        }
    }
    used.iter().filter(|&&u| u).count() as f64 / pool.edge_count() as f64 * 100.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no latency pairs to compare")]
    EmptyInput,
    #[error("latency lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Mean excess latency of `worse` over `better`, as a percentage of the mean
/// of `better`.
pub fn latency_deviation(better: &[f64], worse: &[f64]) -> Result<f64, MetricError> {
    if better.len() != worse.len() {
        return Err(MetricError::LengthMismatch(better.len(), worse.len()));
    }
    if better.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = better.len() as f64;
    let mean = better.iter().sum::<f64>() / n;
    let excess: f64 = better.iter().zip(worse).map(|(b, w)| w - b).sum();
    Ok(excess / (n * mean) * 100.0)
}

/// Percentage of runs without a valid solution.
pub fn invalid_pct(valid: &[bool]) -> f64 {
    if valid.is_empty() {
        return 0.0;
    }
    valid.iter().filter(|&&v| !v).count() as f64 / valid.len() as f64 * 100.0
}
