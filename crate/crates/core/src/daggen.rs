//! Random synthetic query DAGs.
//!
//! Vertices are laid out in layers: the sources form layer 0 and the queries
//! are split into layers of one to three vertices. The sources feed the first
//! layer and every later query gets one parent from the nearest layer with
//! spare out-degree. Each vertex then draws a target out-degree in
//! `1..=max_out_degree` and adds edges to vertices in the next two layers.
//! Vertices of the last layer are the sinks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::{propagate_rates, QueryDag, QueryKind, QueryVariant, Vertex};
use crate::profiles::BenchmarkDataset;

/// Input rate at which generated DAGs are screened.
pub const SCREEN_RATE: f64 = 1000.0;
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;
const MAX_LAYER_WIDTH: usize = 3;
/// Edges reach at most this many layers ahead.
const EDGE_REACH: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("cannot build a DAG with {n_vertices} vertices, {n_sources} sources and out-degree {max_out_degree}: {reason}")]
    UnsatisfiableShape {
        n_vertices: usize,
        n_sources: usize,
        max_out_degree: usize,
        reason: String,
    },
    #[error("dataset has no eligible variant of kind {0}")]
    NoVariant(QueryKind),
    #[error("no DAG passed screening after {0} attempts")]
    GiveUp(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Reject {
    /// Some query receives more events than the upper quartile of its peak
    /// rate on a VM.
    RateTooHigh { vertex: String, rate: f64, limit: f64 },
    /// The DAG emits nothing.
    ZeroSelectivity,
}

/// Builds one random layered DAG.
pub fn generate_dag<R: Rng + ?Sized>(
    n_vertices: usize,
    n_sources: usize,
    max_out_degree: usize,
    dataset: &BenchmarkDataset,
    rng: &mut R,
) -> Result<QueryDag, GenError> {
    let shape_err = |reason: &str| GenError::UnsatisfiableShape {
        n_vertices,
        n_sources,
        max_out_degree,
        reason: reason.to_string(),
    };
    if n_vertices < 4 {
        return Err(shape_err("need at least 4 vertices"));
    }
    if n_sources == 0 || n_sources >= n_vertices {
        return Err(shape_err("need between 1 and n-1 sources"));
    }
    if max_out_degree == 0 {
        return Err(shape_err("out-degree must be positive"));
    }
    let n_queries = n_vertices - n_sources;

    let mut out_deg = vec![0usize; n_vertices];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut has_edge = std::collections::HashSet::new();
    let mut add = |a: usize, b: usize, out_deg: &mut Vec<usize>, edges: &mut Vec<(usize, usize)>| {
        if has_edge.insert((a, b)) {
            out_deg[a] += 1;
            edges.push((a, b));
        }
    };

    // Layer 1 is fed by the sources: each layer-1 query gets a distinct
    // source while they last, and leftover sources join a random one.
    let mut layers: Vec<Vec<usize>> = vec![(0..n_sources).collect()];
    let w1 = rng
        .gen_range(1..=MAX_LAYER_WIDTH)
        .min(n_queries)
        .min(n_sources * max_out_degree);
    let first: Vec<usize> = (n_sources..n_sources + w1).collect();
    let mut sources: Vec<usize> = (0..n_sources).collect();
    sources.shuffle(rng);
    for (i, &src) in sources.iter().enumerate() {
        let child = if i < w1 {
            first[i]
        } else {
            *first.choose(rng).expect("layer 1 is non-empty")
        };
        add(src, child, &mut out_deg, &mut edges);
    }
    // Layer-1 queries beyond the source count still need a parent.
    for &v in first.iter().skip(n_sources) {
        let open: Vec<usize> = sources
            .iter()
            .copied()
            .filter(|&u| out_deg[u] < max_out_degree)
            .collect();
        let src = *open.choose(rng).expect("first layer bounded by source capacity");
        add(src, v, &mut out_deg, &mut edges);
    }
    layers.push(first);

    // Later layers: each query takes a parent with spare out-degree, from the
    // nearest layer that has one. A layer is never wider than the spare
    // capacity above it, so every query finds a parent.
    let mut next = n_sources + w1;
    while next < n_vertices {
        let spare: usize = (n_sources..next).map(|u| max_out_degree - out_deg[u]).sum();
        let width = rng
            .gen_range(1..=MAX_LAYER_WIDTH)
            .min(n_vertices - next)
            .min(spare);
        if width == 0 {
            return Err(shape_err("no spare out-degree left"));
        }
        let members: Vec<usize> = (next..next + width).collect();
        for &v in &members {
            let parent = layers[1..].iter().rev().find_map(|layer| {
                let open: Vec<usize> = layer
                    .iter()
                    .copied()
                    .filter(|&u| out_deg[u] < max_out_degree)
                    .collect();
                open.choose(rng).copied()
            });
            let u = parent.expect("layer width bounded by spare capacity");
            add(u, v, &mut out_deg, &mut edges);
        }
        layers.push(members);
        next += width;
    }
    let mut layer_of = vec![0; n_vertices];
    for (l, members) in layers.iter().enumerate() {
        for &v in members {
            layer_of[v] = l;
        }
    }

    // Extra edges up to each vertex's drawn out-degree.
    let last = layers.len() - 1;
    for u in 0..n_vertices {
        let l = layer_of[u];
        if l == last {
            continue;
        }
        let target = rng.gen_range(1..=max_out_degree);
        let mut candidates: Vec<usize> = layers[l + 1..=(l + EDGE_REACH).min(last)].concat();
        candidates.shuffle(rng);
        for w in candidates {
            if out_deg[u] >= target {
                break;
            }
            add(u, w, &mut out_deg, &mut edges);
        }
        // A vertex above the last layer must not become a sink.
        if out_deg[u] == 0 {
            let w = *layers[l + 1].choose(rng).expect("layers are non-empty");
            add(u, w, &mut out_deg, &mut edges);
        }
    }
    edges.sort_unstable();

    let mut vertices: Vec<Vertex> = (0..n_sources).map(|i| Vertex::source(format!("src{i}"))).collect();
    for i in 0..n_queries {
        vertices.push(Vertex::query(format!("q{i}"), draw_variant(dataset, rng)?));
    }
    QueryDag::new(vertices, edges, None).map_err(|e| shape_err(&e.to_string()))
}

/// A query kind uniformly, then a uniform eligible variant of that kind.
pub fn draw_variant<R: Rng + ?Sized>(dataset: &BenchmarkDataset, rng: &mut R) -> Result<QueryVariant, GenError> {
    let kind = *QueryKind::ALL.choose(rng).expect("five kinds");
    let pool: Vec<&QueryVariant> = dataset
        .variants
        .iter()
        .filter(|q| q.kind == kind && q.eligible)
        .collect();
    pool.choose(rng)
        .map(|q| (*q).clone())
        .ok_or(GenError::NoVariant(kind))
}

/// Feasibility screens at [`SCREEN_RATE`].
pub fn screen_dag(dag: &QueryDag, dataset: &BenchmarkDataset) -> Result<(), Reject> {
    let rates = propagate_rates(dag, SCREEN_RATE);
    if rates.dag_selectivity == 0.0 {
        return Err(Reject::ZeroSelectivity);
    }
    for (v, vertex) in dag.vertices().iter().enumerate() {
        let Some(q) = &vertex.query else { continue };
        let limit = match dataset.compute(&q.id) {
            Ok(c) => c.cloud.q3,
            Err(_) => continue,
        };
        if rates.omega_in[v] > limit {
            return Err(Reject::RateTooHigh {
                vertex: vertex.id.clone(),
                rate: rates.omega_in[v],
                limit,
            });
        }
    }
    Ok(())
}

/// Generates until a DAG passes screening. Returns the DAG and the number of
/// attempts used.
pub fn generate_screened<R: Rng + ?Sized>(
    n_vertices: usize,
    n_sources: usize,
    max_out_degree: usize,
    dataset: &BenchmarkDataset,
    max_attempts: usize,
    rng: &mut R,
) -> Result<(QueryDag, usize), GenError> {
    for attempt in 1..=max_attempts {
        let dag = generate_dag(n_vertices, n_sources, max_out_degree, dataset, rng)?;
        if screen_dag(&dag, dataset).is_ok() {
            return Ok((dag, attempt));
        }
    }
    Err(GenError::GiveUp(max_attempts))
}

/// Shape of one suite member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub id: String,
    pub n_vertices: usize,
    pub n_sources: usize,
    pub seed: u64,
}

/// Sizes and source counts of the evaluation suite: 4, 6 and 8 vertices with
/// one source, 10 to 50 with one or four, three instances each.
pub fn standard_suite(master_seed: u64) -> Vec<SuiteSpec> {
    suite_specs(&[4, 6, 8, 10, 12, 20, 30, 40, 50], 3, master_seed)
}

pub fn suite_specs(sizes: &[usize], per_config: usize, master_seed: u64) -> Vec<SuiteSpec> {
    let mut out = Vec::new();
    for &n in sizes {
        let source_counts: &[usize] = if n < 10 { &[1] } else { &[1, 4] };
        for &s in source_counts {
            for k in 1..=per_config {
                let id = format!("{n}_{s}_{k}");
                let seed = derive_seed(master_seed, &id);
                out.push(SuiteSpec {
                    id,
                    n_vertices: n,
                    n_sources: s,
                    seed,
                });
            }
        }
    }
    out
}

/// Stable per-member seed from the master seed and the member id (FNV-1a
/// followed by a splitmix64 finalizer).
pub fn derive_seed(master: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ master;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    #[serde(flatten)]
    pub spec: SuiteSpec,
    pub max_out_degree: usize,
    pub attempts: usize,
    /// DAG file name relative to the manifest.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub master_seed: u64,
    pub dataset: String,
    pub entries: Vec<SuiteEntry>,
}

/// Generates one suite member from its seed; the out-degree cap is drawn
/// from `1..=5` with the same rng.
pub fn generate_member(
    spec: &SuiteSpec,
    dataset: &BenchmarkDataset,
    max_attempts: usize,
) -> Result<(QueryDag, SuiteEntry), GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let max_out_degree = rng.gen_range(1..=5);
    let (dag, attempts) = generate_screened(
        spec.n_vertices,
        spec.n_sources,
        max_out_degree,
        dataset,
        max_attempts,
        &mut rng,
    )?;
    let entry = SuiteEntry {
        spec: spec.clone(),
        max_out_degree,
        attempts,
        file: format!("{}.json", spec.id),
    };
    Ok((dag, entry))
}
