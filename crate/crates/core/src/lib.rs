//! Placement of complex-event-processing query DAGs onto battery-powered edge
//! devices and cloud VMs, minimizing end-to-end latency under throughput and
//! energy constraints.

pub mod daggen;
pub mod dataflow;
pub mod experiment;
pub mod placement;
pub mod profiles;
pub mod resources;
pub mod scenario;
pub mod solver;

pub use dataflow::{propagate_rates, QueryDag, QueryKind, QueryVariant, RateMap};
pub use placement::{Evaluation, Placement, Problem};
pub use profiles::{BenchmarkDataset, QuartileDistribution, ResourceClass};
pub use resources::{EnergyConfig, ResourcePool, Setup};
pub use scenario::RuntimeScenario;
pub use solver::Solution;
