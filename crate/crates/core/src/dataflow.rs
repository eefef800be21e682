//! Query DAG model: CEP query variants, DAG structure and event-rate propagation.
//!
//! A DAG vertex is either a *source* (a no-op event generator with in-degree
//! zero) or a CEP query. Sinks are the vertices whose output leaves the DAG;
//! by default these are the vertices with no out-edge, but a DAG file may name
//! additional sinks that also feed other queries.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved variant id marking a source vertex in DAG files.
pub const SOURCE_VARIANT: &str = "source";

/// Event size emitted by every benchmark query unless a dataset overrides it.
pub const DEFAULT_EVENT_SIZE_BYTES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Filter,
    Sequence,
    Pattern,
    AggregateBatch,
    AggregateSliding,
}

impl QueryKind {
    pub const ALL: [QueryKind; 5] = [
        QueryKind::Filter,
        QueryKind::Sequence,
        QueryKind::Pattern,
        QueryKind::AggregateBatch,
        QueryKind::AggregateSliding,
    ];
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QueryKind::Filter => "filter",
            QueryKind::Sequence => "sequence",
            QueryKind::Pattern => "pattern",
            QueryKind::AggregateBatch => "aggregate_batch",
            QueryKind::AggregateSliding => "aggregate_sliding",
        };
        f.write_str(s)
    }
}

/// One benchmarked CEP query configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryVariant {
    pub id: String,
    pub kind: QueryKind,
    /// Output events per input event.
    pub selectivity: f64,
    /// Pattern/sequence length or aggregation window, in events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<u32>,
    /// Size in bytes of each event written to the out-edges.
    #[serde(default = "default_event_size")]
    pub out_event_size: f64,
    /// Whether the random DAG generator may draw this variant.
    #[serde(default = "default_true")]
    pub eligible: bool,
}

fn default_event_size() -> f64 {
    DEFAULT_EVENT_SIZE_BYTES
}

fn default_true() -> bool {
    true
}

impl QueryVariant {
    fn new(id: &str, kind: QueryKind, selectivity: f64, length: Option<u32>) -> Self {
        QueryVariant {
            id: id.to_string(),
            kind,
            selectivity,
            length,
            out_event_size: DEFAULT_EVENT_SIZE_BYTES,
            eligible: true,
        }
    }

    /// The 21 benchmark queries. Pattern queries with selectivity 0.5 and 0.0
    /// have a sharply lower peak rate and are excluded from DAG generation,
    /// leaving 17 eligible variants.
    pub fn benchmark_catalog() -> Vec<QueryVariant> {
        use QueryKind::*;
        let mut v = vec![
            QueryVariant::new("Fil 1.0", Filter, 1.0, None),
            QueryVariant::new("Fil 0.5", Filter, 0.5, None),
            QueryVariant::new("Fil 0.0", Filter, 0.0, None),
        ];
        for (len, name) in [(3, "Seq3"), (5, "Seq5")] {
            for sel in [1.0, 0.5, 0.0] {
                v.push(QueryVariant::new(&format!("{name} {sel:.1}"), Sequence, sel, Some(len)));
            }
        }
        for (len, name) in [(3, "Pat3"), (5, "Pat5")] {
            for sel in [1.0, 0.5, 0.0] {
                let mut q = QueryVariant::new(&format!("{name} {sel:.1}"), Pattern, sel, Some(len));
                q.eligible = sel == 1.0;
                v.push(q);
            }
        }
        for w in [60u32, 600, 6000] {
            v.push(QueryVariant::new(&format!("Agg B {w}"), AggregateBatch, 1.0 / w as f64, Some(w)));
        }
        for w in [60u32, 600, 6000] {
            v.push(QueryVariant::new(&format!("Agg S {w}"), AggregateSliding, 1.0, Some(w)));
        }
        v
    }

    /// Checks the kind-specific selectivity rules.
    pub fn check(&self) -> Result<(), DagError> {
        let bad = |why: &str| {
            Err(DagError::InvalidVariant {
                id: self.id.clone(),
                reason: why.to_string(),
            })
        };
        if !(self.selectivity >= 0.0) || !self.selectivity.is_finite() {
            return bad("selectivity must be finite and >= 0");
        }
        if !(self.out_event_size > 0.0) {
            return bad("out_event_size must be > 0");
        }
        match self.kind {
            QueryKind::AggregateBatch => match self.length {
                Some(w) if w > 0 && (self.selectivity - 1.0 / w as f64).abs() < 1e-12 => Ok(()),
                _ => bad("batch aggregate selectivity must equal 1/window"),
            },
            QueryKind::AggregateSliding if self.selectivity != 1.0 => {
                bad("sliding aggregate selectivity must be 1")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DagError {
    #[error("graph contains a cycle")]
    CyclicGraph,
    #[error("vertex `{0}` has no path to any sink")]
    OrphanVertex(String),
    #[error("DAG must have at least one source and one sink")]
    EmptySourceOrSink,
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("edge references unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown query variant `{0}`")]
    UnknownVariant(String),
    #[error("vertex `{0}` has no in-edges but is a query; sources must use variant `source`")]
    SourceWithQuery(String),
    #[error("vertex `{0}` has in-edges but no query variant")]
    MissingQuery(String),
    #[error("source vertex `{0}` cannot be a sink")]
    SourceAsSink(String),
    #[error("invalid variant `{id}`: {reason}")]
    InvalidVariant { id: String, reason: String },
    #[error("more than {cap} source-to-sink paths")]
    PathExplosion { cap: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    /// `None` for source vertices.
    pub query: Option<QueryVariant>,
}

impl Vertex {
    pub fn source(id: impl Into<String>) -> Self {
        Vertex {
            id: id.into(),
            query: None,
        }
    }

    pub fn query(id: impl Into<String>, variant: QueryVariant) -> Self {
        Vertex {
            id: id.into(),
            query: Some(variant),
        }
    }

    pub fn is_source(&self) -> bool {
        self.query.is_none()
    }

    /// Selectivity of the vertex; sources pass events through unchanged.
    pub fn selectivity(&self) -> f64 {
        self.query.as_ref().map_or(1.0, |q| q.selectivity)
    }

    /// Bytes per output event; sources emit the default event size.
    pub fn out_event_size(&self) -> f64 {
        self.query
            .as_ref()
            .map_or(DEFAULT_EVENT_SIZE_BYTES, |q| q.out_event_size)
    }
}

/// A validated query DAG. Construction fails unless the graph is acyclic, has
/// sources and sinks, and every vertex lies on a source-to-sink path.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryDag {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
    sources: Vec<usize>,
    sinks: Vec<usize>,
    is_sink: Vec<bool>,
    topo: Vec<usize>,
    in_edges: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
}

impl QueryDag {
    /// Builds and validates a DAG. When `sinks` is `None` the sinks are the
    /// vertices without out-edges.
    pub fn new(
        vertices: Vec<Vertex>,
        edges: Vec<(usize, usize)>,
        sinks: Option<Vec<usize>>,
    ) -> Result<Self, DagError> {
        let n = vertices.len();
        let mut seen = HashSet::new();
        for v in &vertices {
            if !seen.insert(v.id.as_str()) {
                return Err(DagError::DuplicateVertex(v.id.clone()));
            }
            if let Some(q) = &v.query {
                q.check()?;
            }
        }
        let mut in_edges = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(DagError::UnknownVertex(format!("#{}", a.max(b))));
            }
            out_edges[a].push(k);
            in_edges[b].push(k);
        }

        // Kahn's algorithm; ties resolved by vertex index for a stable order.
        let mut indeg: Vec<usize> = in_edges.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            topo.push(v);
            for &e in &out_edges[v] {
                let w = edges[e].1;
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        if topo.len() != n {
            return Err(DagError::CyclicGraph);
        }

        let sources: Vec<usize> = (0..n).filter(|&v| in_edges[v].is_empty()).collect();
        for v in 0..n {
            match (in_edges[v].is_empty(), vertices[v].is_source()) {
                (true, false) => return Err(DagError::SourceWithQuery(vertices[v].id.clone())),
                (false, true) => return Err(DagError::MissingQuery(vertices[v].id.clone())),
                _ => {}
            }
        }

        let mut sinks = match sinks {
            Some(s) => s,
            None => (0..n).filter(|&v| out_edges[v].is_empty()).collect(),
        };
        sinks.sort_unstable();
        sinks.dedup();
        if sources.is_empty() || sinks.is_empty() {
            return Err(DagError::EmptySourceOrSink);
        }
        let mut is_sink = vec![false; n];
        for &s in &sinks {
            if s >= n {
                return Err(DagError::UnknownVertex(format!("#{s}")));
            }
            if vertices[s].is_source() {
                return Err(DagError::SourceAsSink(vertices[s].id.clone()));
            }
            is_sink[s] = true;
        }

        // Reverse sweep: a vertex reaches a sink if it is one or a successor does.
        let mut reaches = is_sink.clone();
        for &v in topo.iter().rev() {
            if !reaches[v] {
                reaches[v] = out_edges[v].iter().any(|&e| reaches[edges[e].1]);
            }
        }
        if let Some(v) = (0..n).find(|&v| !reaches[v]) {
            return Err(DagError::OrphanVertex(vertices[v].id.clone()));
        }

        Ok(QueryDag {
            vertices,
            edges,
            sources,
            sinks,
            is_sink,
            topo,
            in_edges,
            out_edges,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    pub fn is_source(&self, v: usize) -> bool {
        self.vertices[v].is_source()
    }

    pub fn is_sink(&self, v: usize) -> bool {
        self.is_sink[v]
    }

    /// Vertices in topological order.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Indices into [`edges`](Self::edges) of the edges entering `v`.
    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    /// Vertices that are neither sources nor sinks, in index order. These are
    /// the free variables of a placement.
    pub fn unpinned(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| !self.is_source(v) && !self.is_sink(v))
            .collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// Resolves a DAG file against a variant catalog and validates it.
    pub fn from_file<F>(file: &DagFile, lookup: F) -> Result<Self, DagError>
    where
        F: Fn(&str) -> Option<QueryVariant>,
    {
        let mut index = HashMap::new();
        let mut vertices = Vec::with_capacity(file.vertices.len());
        for (i, fv) in file.vertices.iter().enumerate() {
            if index.insert(fv.id.clone(), i).is_some() {
                return Err(DagError::DuplicateVertex(fv.id.clone()));
            }
            let query = match fv.variant.as_deref() {
                None | Some(SOURCE_VARIANT) => None,
                Some(id) => Some(lookup(id).ok_or_else(|| DagError::UnknownVariant(id.to_string()))?),
            };
            vertices.push(Vertex {
                id: fv.id.clone(),
                query,
            });
        }
        let resolve = |id: &String| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| DagError::UnknownVertex(id.clone()))
        };
        let edges = file
            .edges
            .iter()
            .map(|(a, b)| Ok((resolve(a)?, resolve(b)?)))
            .collect::<Result<Vec<_>, DagError>>()?;
        let sinks = match &file.sinks {
            Some(s) => Some(s.iter().map(resolve).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        QueryDag::new(vertices, edges, sinks)
    }

    pub fn to_file(&self) -> DagFile {
        let implicit: Vec<usize> = (0..self.len())
            .filter(|&v| self.out_edges[v].is_empty())
            .collect();
        DagFile {
            vertices: self
                .vertices
                .iter()
                .map(|v| DagFileVertex {
                    id: v.id.clone(),
                    variant: Some(
                        v.query
                            .as_ref()
                            .map_or_else(|| SOURCE_VARIANT.to_string(), |q| q.id.clone()),
                    ),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| (self.vertices[a].id.clone(), self.vertices[b].id.clone()))
                .collect(),
            sinks: (implicit != self.sinks)
                .then(|| self.sinks.iter().map(|&s| self.vertices[s].id.clone()).collect()),
        }
    }
}

/// On-disk DAG description: `{vertices:[{id, variant}], edges:[[from,to]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagFile {
    pub vertices: Vec<DagFileVertex>,
    pub edges: Vec<(String, String)>,
    /// Explicit sink set; defaults to vertices without out-edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinks: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagFileVertex {
    pub id: String,
    #[serde(default)]
    pub variant: Option<String>,
}

/// Expected event rates through a DAG for a given input rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMap {
    pub omega_in: Vec<f64>,
    pub omega_out: Vec<f64>,
    pub dag_input: f64,
    pub dag_output: f64,
    pub dag_selectivity: f64,
}

impl RateMap {
    /// Every rate multiplied by `factor`. Selectivity is unchanged since the
    /// propagation is linear in the input rate.
    pub fn scaled(&self, factor: f64) -> RateMap {
        RateMap {
            omega_in: self.omega_in.iter().map(|r| r * factor).collect(),
            omega_out: self.omega_out.iter().map(|r| r * factor).collect(),
            dag_input: self.dag_input * factor,
            dag_output: self.dag_output * factor,
            dag_selectivity: self.dag_selectivity,
        }
    }
}

/// Propagates `input_rate` events/second through the DAG in one topological
/// pass. Sources split the input evenly; each out-edge carries the full
/// output stream and in-edges interleave into one input stream.
pub fn propagate_rates(dag: &QueryDag, input_rate: f64) -> RateMap {
    debug_assert!(input_rate > 0.0);
    let n = dag.len();
    let per_source = input_rate / dag.sources().len() as f64;
    let mut omega_in = vec![0.0; n];
    let mut omega_out = vec![0.0; n];
    for &v in dag.topo_order() {
        if dag.is_source(v) {
            omega_in[v] = per_source;
            omega_out[v] = per_source;
        } else {
            let rin: f64 = dag
                .in_edges(v)
                .iter()
                .map(|&e| omega_out[dag.edges()[e].0])
                .sum();
            omega_in[v] = rin;
            omega_out[v] = rin * dag.vertex(v).selectivity();
        }
    }
    let dag_output: f64 = dag.sinks().iter().map(|&s| omega_out[s]).sum();
    RateMap {
        omega_in,
        omega_out,
        dag_input: input_rate,
        dag_output,
        dag_selectivity: dag_output / input_rate,
    }
}

/// Lists every source-to-sink vertex sequence. A path may end at a sink that
/// also feeds further queries, so one walk can yield several paths.
pub fn enumerate_paths(dag: &QueryDag, cap: usize) -> Result<Vec<Vec<usize>>, DagError> {
    fn walk(
        dag: &QueryDag,
        v: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cap: usize,
    ) -> Result<(), DagError> {
        stack.push(v);
        if dag.is_sink(v) {
            if out.len() == cap {
                return Err(DagError::PathExplosion { cap });
            }
            out.push(stack.clone());
        }
        for &e in dag.out_edges(v) {
            walk(dag, dag.edges()[e].1, stack, out, cap)?;
        }
        stack.pop();
        Ok(())
    }

    let mut out = Vec::new();
    let mut stack = Vec::new();
    for &s in dag.sources() {
        walk(dag, s, &mut stack, &mut out, cap)?;
    }
    Ok(out)
}
