//! Concrete runtime parameters for one DAG, drawn from a benchmark dataset.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataflow::{propagate_rates, QueryDag, RateMap};
use crate::profiles::{energy_per_event, BenchmarkDataset, ProfileError, ResourceClass};

/// Per-vertex compute and energy cost. All edge devices share one value, as
/// do all VMs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexParams {
    /// Seconds per event on an edge device.
    pub lambda_edge: f64,
    /// Seconds per event on a cloud VM.
    pub lambda_cloud: f64,
    /// Incremental charge per input event on an edge device (mAh).
    pub epsilon_edge: f64,
}

impl VertexParams {
    pub const NOOP: VertexParams = VertexParams {
        lambda_edge: 0.0,
        lambda_cloud: 0.0,
        epsilon_edge: 0.0,
    };

    pub fn lambda(&self, class: ResourceClass) -> f64 {
        match class {
            ResourceClass::Edge => self.lambda_edge,
            ResourceClass::Cloud => self.lambda_cloud,
        }
    }
}

/// Network characteristics of one DAG edge. Which pair applies depends on
/// the classes of the resources hosting its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// One-way edge-to-edge latency (seconds).
    pub latency_ee: f64,
    /// One-way edge-to-cloud latency (seconds).
    pub latency_ec: f64,
    /// Edge-to-edge bandwidth (bits/second).
    pub bandwidth_ee: f64,
    /// Edge-to-cloud bandwidth (bits/second).
    pub bandwidth_ec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeScenario {
    pub vertices: Vec<VertexParams>,
    /// Parallel to [`QueryDag::edges`].
    pub links: Vec<LinkParams>,
    pub rates: RateMap,
}

impl RuntimeScenario {
    /// Samples one value per vertex and class for compute and energy, and one
    /// latency/bandwidth tuple per DAG edge. Deterministic for a given rng
    /// state.
    pub fn materialize<R: Rng + ?Sized>(
        dag: &QueryDag,
        dataset: &BenchmarkDataset,
        input_rate: f64,
        rng: &mut R,
    ) -> Result<Self, ProfileError> {
        let mut vertices = Vec::with_capacity(dag.len());
        for v in dag.vertices() {
            let Some(q) = &v.query else {
                vertices.push(VertexParams::NOOP);
                continue;
            };
            let compute = dataset.compute(&q.id)?;
            let peak_edge = compute.edge.sample(rng);
            let peak_cloud = compute.cloud.sample(rng);
            let epsilon_edge = match dataset.energy_per_event_mah.get(&q.id) {
                Some(&e) => e,
                None => {
                    let current = dataset.energy_current_ma.get(&q.id).ok_or_else(|| {
                        ProfileError::MissingVariant {
                            variant: q.id.clone(),
                            what: "energy",
                        }
                    })?;
                    energy_per_event(current.sample(rng), dataset.base_load_ma, peak_edge)?
                }
            };
            vertices.push(VertexParams {
                lambda_edge: 1.0 / peak_edge,
                lambda_cloud: 1.0 / peak_cloud,
                epsilon_edge,
            });
        }

        let net = &dataset.network;
        let links = dag
            .edges()
            .iter()
            .map(|_| LinkParams {
                latency_ee: net.edge_edge.latency_ms.sample(rng) / 1e3,
                latency_ec: net.edge_cloud.latency_ms.sample(rng) / 1e3,
                bandwidth_ee: net.edge_edge.bandwidth_mbps.sample(rng) * 1e6,
                bandwidth_ec: net.edge_cloud.bandwidth_mbps.sample(rng) * 1e6,
            })
            .collect();

        Ok(RuntimeScenario {
            vertices,
            links,
            rates: propagate_rates(dag, input_rate),
        })
    }

    /// Same sampled parameters at a different DAG input rate.
    pub fn with_input_rate(&self, dag: &QueryDag, input_rate: f64) -> Self {
        RuntimeScenario {
            vertices: self.vertices.clone(),
            links: self.links.clone(),
            rates: propagate_rates(dag, input_rate),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
