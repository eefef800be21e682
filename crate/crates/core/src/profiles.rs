//! Benchmark distributions for compute, energy and network, and the quartile
//! sampling rule used to draw runtime parameters from them.
//!
//! Dataset files use benchmark units (events/second, mA, ms, Mbps). Values
//! handed to the rest of the crate are converted to seconds, bits/second and
//! mAh.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataflow::QueryVariant;

const CAMPUS_LAN: &str = include_str!("../data/campus-lan.json");
const PLANETLAB_WAN: &str = include_str!("../data/planetlab-wan.json");

/// Names of the datasets compiled into the crate.
pub const BUNDLED: [&str; 2] = ["campus-lan", "planetlab-wan"];

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("reading dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing dataset: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("variant `{variant}` has no {what} profile")]
    MissingVariant { variant: String, what: &'static str },
    #[error("quartiles of {what} are not monotone")]
    NonMonotoneQuartiles { what: String },
    #[error("{what} must be positive")]
    NonPositive { what: String },
    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("no bundled dataset named `{0}`")]
    UnknownBundled(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    Edge,
    Cloud,
}

/// Five-number summary of a measured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileDistribution {
    pub min: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub max: f64,
}

impl QuartileDistribution {
    pub fn new(min: f64, q1: f64, q2: f64, q3: f64, max: f64) -> Result<Self, ProfileError> {
        let d = QuartileDistribution { min, q1, q2, q3, max };
        d.check("distribution")?;
        Ok(d)
    }

    /// Distribution known only by its median: quartiles at `median·(1 ∓ spread)`
    /// and the whiskers collapsed onto the quartiles.
    pub fn from_median(median: f64, spread: f64) -> Self {
        let q1 = median * (1.0 - spread);
        let q3 = median * (1.0 + spread);
        QuartileDistribution {
            min: q1,
            q1,
            q2: median,
            q3,
            max: q3,
        }
    }

    /// A point mass.
    pub fn constant(value: f64) -> Self {
        QuartileDistribution {
            min: value,
            q1: value,
            q2: value,
            q3: value,
            max: value,
        }
    }

    fn check(&self, what: &str) -> Result<(), ProfileError> {
        let ok = [self.min, self.q1, self.q2, self.q3, self.max]
            .windows(2)
            .all(|w| w[0] <= w[1])
            && self.min.is_finite()
            && self.max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ProfileError::NonMonotoneQuartiles {
                what: what.to_string(),
            })
        }
    }

    fn check_positive(&self, what: &str) -> Result<(), ProfileError> {
        self.check(what)?;
        if self.q1 > 0.0 {
            Ok(())
        } else {
            Err(ProfileError::NonPositive {
                what: what.to_string(),
            })
        }
    }

    /// Picks the lower or upper inter-quartile half with equal chance, then
    /// draws uniformly inside it. The result always lies in `[q1, q3]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = if rng.gen_bool(0.5) {
            (self.q1, self.q2)
        } else {
            (self.q2, self.q3)
        };
        lo + (hi - lo) * rng.gen::<f64>()
    }
}

/// Linear fit of the throughput penalty, in percent, for `m ≥ 2` queries
/// sharing a resource: `slope·(m−1) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadFit {
    pub slope: f64,
    pub intercept: f64,
}

impl OverheadFit {
    pub const EDGE: OverheadFit = OverheadFit {
        slope: -1.12,
        intercept: -5.68,
    };
    pub const CLOUD: OverheadFit = OverheadFit {
        slope: -0.35,
        intercept: -3.80,
    };

    /// Fractional overhead π_m. Zero for an exclusive resource.
    pub fn overhead(&self, m: usize) -> f64 {
        if m <= 1 {
            0.0
        } else {
            (self.slope * (m - 1) as f64 + self.intercept) / 100.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overheads {
    pub edge: OverheadFit,
    pub cloud: OverheadFit,
}

impl Default for Overheads {
    fn default() -> Self {
        Overheads {
            edge: OverheadFit::EDGE,
            cloud: OverheadFit::CLOUD,
        }
    }
}

impl Overheads {
    pub fn for_class(&self, class: ResourceClass) -> OverheadFit {
        match class {
            ResourceClass::Edge => self.edge,
            ResourceClass::Cloud => self.cloud,
        }
    }
}

/// Peak sustained input rate of one variant on each resource class (e/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeProfile {
    pub edge: QuartileDistribution,
    pub cloud: QuartileDistribution,
}

impl ComputeProfile {
    pub fn for_class(&self, class: ResourceClass) -> &QuartileDistribution {
        match class {
            ResourceClass::Edge => &self.edge,
            ResourceClass::Cloud => &self.cloud,
        }
    }
}

/// One-way latency (ms) and bandwidth (Mbps) between two resource classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub latency_ms: QuartileDistribution,
    pub bandwidth_mbps: QuartileDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub edge_edge: LinkProfile,
    pub edge_cloud: LinkProfile,
}

/// Validated benchmark data. Serializes to the full-quartile form of the
/// dataset file schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkDataset {
    pub name: String,
    /// Relative quartile half-width used to expand median-only entries.
    pub quartile_spread: f64,
    pub variants: Vec<QueryVariant>,
    pub compute: BTreeMap<String, ComputeProfile>,
    /// Total current drawn by an edge device running the variant at peak (mA).
    pub energy_current_ma: BTreeMap<String, QuartileDistribution>,
    /// Per-variant energy per event overrides (mAh/event).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub energy_per_event_mah: BTreeMap<String, f64>,
    /// Idle current of an edge device (mA).
    pub base_load_ma: f64,
    pub network: NetworkProfile,
    pub overhead: Overheads,
}

/// Dataset entries may give full quartiles or only a median.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawDistribution {
    Full(QuartileDistribution),
    Median { median: f64 },
}

impl RawDistribution {
    fn resolve(&self, spread: f64) -> QuartileDistribution {
        match *self {
            RawDistribution::Full(d) => d,
            RawDistribution::Median { median } => QuartileDistribution::from_median(median, spread),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawCompute {
    edge: RawDistribution,
    cloud: RawDistribution,
}

#[derive(Debug, Deserialize)]
struct RawDataset {
    name: String,
    #[serde(default = "default_spread")]
    quartile_spread: f64,
    #[serde(default = "QueryVariant::benchmark_catalog")]
    variants: Vec<QueryVariant>,
    compute: BTreeMap<String, RawCompute>,
    energy_current_ma: BTreeMap<String, RawDistribution>,
    #[serde(default)]
    energy_per_event_mah: BTreeMap<String, f64>,
    base_load_ma: f64,
    network: NetworkProfile,
    #[serde(default)]
    overhead: Overheads,
}

fn default_spread() -> f64 {
    0.05
}

impl BenchmarkDataset {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let raw: RawDataset = serde_json::from_str(text)?;
        let spread = raw.quartile_spread;
        let ds = BenchmarkDataset {
            name: raw.name,
            quartile_spread: spread,
            variants: raw.variants,
            compute: raw
                .compute
                .into_iter()
                .map(|(k, c)| {
                    (
                        k,
                        ComputeProfile {
                            edge: c.edge.resolve(spread),
                            cloud: c.cloud.resolve(spread),
                        },
                    )
                })
                .collect(),
            energy_current_ma: raw
                .energy_current_ma
                .into_iter()
                .map(|(k, d)| (k, d.resolve(spread)))
                .collect(),
            energy_per_event_mah: raw.energy_per_event_mah,
            base_load_ma: raw.base_load_ma,
            network: raw.network,
            overhead: raw.overhead,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    /// One of the datasets in [`BUNDLED`].
    pub fn bundled(name: &str) -> Result<Self, ProfileError> {
        match name.trim_end_matches(".json") {
            "campus-lan" => Self::from_json(CAMPUS_LAN),
            "planetlab-wan" => Self::from_json(PLANETLAB_WAN),
            other => Err(ProfileError::UnknownBundled(other.to_string())),
        }
    }

    /// Loads `bundled:<name>` or a bundled name without a path, else a file.
    pub fn open(spec: &str) -> Result<Self, ProfileError> {
        let name = spec.strip_prefix("bundled:").unwrap_or(spec);
        if BUNDLED.contains(&name.trim_end_matches(".json")) && !Path::new(spec).exists() {
            Self::bundled(name)
        } else {
            Self::load(spec)
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        for q in &self.variants {
            q.check().map_err(|e| ProfileError::NonPositive {
                what: e.to_string(),
            })?;
            let c = self
                .compute
                .get(&q.id)
                .ok_or_else(|| ProfileError::MissingVariant {
                    variant: q.id.clone(),
                    what: "compute",
                })?;
            c.edge.check_positive(&format!("{} edge peak rate", q.id))?;
            c.cloud.check_positive(&format!("{} cloud peak rate", q.id))?;
            if !self.energy_per_event_mah.contains_key(&q.id) {
                self.energy_current_ma
                    .get(&q.id)
                    .ok_or_else(|| ProfileError::MissingVariant {
                        variant: q.id.clone(),
                        what: "energy",
                    })?
                    .check(&format!("{} energy", q.id))?;
            }
        }
        for (name, link) in [
            ("edge-edge", &self.network.edge_edge),
            ("edge-cloud", &self.network.edge_cloud),
        ] {
            link.latency_ms.check_positive(&format!("{name} latency"))?;
            link.bandwidth_mbps
                .check_positive(&format!("{name} bandwidth"))?;
        }
        if !(self.base_load_ma >= 0.0) {
            return Err(ProfileError::NonPositive {
                what: "base load".into(),
            });
        }
        Ok(())
    }

    pub fn variant(&self, id: &str) -> Option<&QueryVariant> {
        self.variants.iter().find(|q| q.id == id)
    }

    pub fn compute(&self, id: &str) -> Result<&ComputeProfile, ProfileError> {
        self.compute.get(id).ok_or_else(|| ProfileError::MissingVariant {
            variant: id.to_string(),
            what: "compute",
        })
    }

    pub fn parallelism_overhead(&self, class: ResourceClass, m: usize) -> f64 {
        self.overhead.for_class(class).overhead(m)
    }
}

/// Incremental energy per processed event (mAh/event) for a query drawing
/// `query_ma` in total at `rate` events/second over a base load of `base_ma`.
/// A draw below the base load counts as zero.
pub fn energy_per_event(query_ma: f64, base_ma: f64, rate: f64) -> Result<f64, ProfileError> {
    if !(rate > 0.0) {
        return Err(ProfileError::NonPositiveRate(rate));
    }
    Ok((query_ma - base_ma).max(0.0) / (3600.0 * rate))
}
