//! Placement solvers.

use serde::Serialize;

use crate::placement::{Evaluation, Placement};

pub mod baselines;
pub mod bf;
pub mod ga;

/// A placement together with its full evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub placement: Placement,
    pub evaluation: Evaluation,
}

impl Solution {
    pub fn makespan(&self) -> f64 {
        self.evaluation.makespan
    }

    pub fn valid(&self) -> bool {
        self.evaluation.valid
    }
}
