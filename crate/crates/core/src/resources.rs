//! Edge devices and cloud VMs available to a placement.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::profiles::ResourceClass;

/// Battery parameters shared by the edge devices of a pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    /// Battery capacity C_k (mAh).
    pub capacity_mah: f64,
    /// Time between recharges τ_k (seconds).
    pub recharge_secs: f64,
    /// Idle current μ_B (mA).
    pub base_load_ma: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            capacity_mah: 8600.0,
            recharge_secs: 86_400.0,
            base_load_ma: 233.0,
        }
    }
}

impl EnergyConfig {
    /// Charge drawn by the idle device over one recharge period (mAh).
    pub fn base_consumption_mah(&self) -> f64 {
        self.base_load_ma * self.recharge_secs / 3600.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDevice {
    pub id: String,
    pub energy: EnergyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudVm {
    pub id: String,
}

/// Edge-pool sizing relative to the number of DAG vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    /// |V| − 1 edge devices.
    Liberal,
    /// ⌈|V|/2⌉ edge devices.
    Centrist,
    /// ⌈|V|/4⌉ edge devices.
    Conservative,
}

impl Setup {
    pub const ALL: [Setup; 3] = [Setup::Liberal, Setup::Centrist, Setup::Conservative];

    pub fn edge_count(self, dag_size: usize) -> usize {
        match self {
            Setup::Liberal => dag_size.saturating_sub(1),
            Setup::Centrist => dag_size.div_ceil(2),
            Setup::Conservative => dag_size.div_ceil(4),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Setup::Liberal => "liberal",
            Setup::Centrist => "centrist",
            Setup::Conservative => "conservative",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "liberal" => Ok(Setup::Liberal),
            "centrist" => Ok(Setup::Centrist),
            "conservative" => Ok(Setup::Conservative),
            _ => Err(format!("unknown setup `{s}`")),
        }
    }
}

/// Resources indexed edges first, then cloud VMs. Resource indices are what
/// placements and chromosomes store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourcePool {
    pub edges: Vec<EdgeDevice>,
    pub clouds: Vec<CloudVm>,
}

impl ResourcePool {
    /// `edge_count` identical edge devices plus `cloud_count` VMs (at least one).
    pub fn new(edge_count: usize, cloud_count: usize, energy: EnergyConfig) -> Self {
        ResourcePool {
            edges: (0..edge_count)
                .map(|i| EdgeDevice {
                    id: format!("edge-{i}"),
                    energy,
                })
                .collect(),
            clouds: (0..cloud_count.max(1))
                .map(|i| CloudVm {
                    id: format!("cloud-{i}"),
                })
                .collect(),
        }
    }

    /// Pool for one of the availability setups, always with a single VM.
    pub fn build(setup: Setup, dag_size: usize, energy: EnergyConfig) -> Self {
        Self::new(setup.edge_count(dag_size), 1, energy)
    }

    pub fn len(&self) -> usize {
        self.edges.len() + self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn class(&self, r: usize) -> ResourceClass {
        if r < self.edges.len() {
            ResourceClass::Edge
        } else {
            ResourceClass::Cloud
        }
    }

    pub fn is_edge(&self, r: usize) -> bool {
        r < self.edges.len()
    }

    /// Index of the `i`-th cloud VM.
    pub fn cloud(&self, i: usize) -> usize {
        self.edges.len() + i
    }

    pub fn id(&self, r: usize) -> &str {
        if r < self.edges.len() {
            &self.edges[r].id
        } else {
            &self.clouds[r - self.edges.len()].id
        }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        (0..self.len()).find(|&r| self.id(r) == id)
    }

    /// True when all edge devices share one battery configuration, which makes
    /// them interchangeable to the cost model.
    pub fn homogeneous_edges(&self) -> bool {
        self.edges.windows(2).all(|w| w[0].energy == w[1].energy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_sizes() {
        let e = EnergyConfig::default();
        let p = ResourcePool::build(Setup::Liberal, 12, e);
        assert_eq!((p.edge_count(), p.clouds.len()), (11, 1));
        assert_eq!(ResourcePool::build(Setup::Centrist, 12, e).edge_count(), 6);
        assert_eq!(ResourcePool::build(Setup::Conservative, 10, e).edge_count(), 3);
        assert_eq!(p.id(0), "edge-0");
        assert_eq!(p.id(11), "cloud-0");
        assert_eq!(p.class(11), ResourceClass::Cloud);
    }

    #[test]
    fn setups_are_nested() {
        for n in 4..60 {
            let l = Setup::Liberal.edge_count(n);
            let c = Setup::Centrist.edge_count(n);
            let k = Setup::Conservative.edge_count(n);
            assert!(l >= c && c >= k && k >= 1, "n={n}");
        }
    }

    #[test]
    fn base_load_over_a_day() {
        let e = EnergyConfig::default();
        assert_eq!(e.base_consumption_mah(), 5592.0);
    }
}
