//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use bal_core::graph::{hypercube, random_regular};
use bal_core::schedule::{Matching, ScheduleModel};
use bal_core::LoadVector;

/// Random matchings on a hypercube of dimension `d`.
pub fn hypercube_model(d: u32) -> ScheduleModel {
    ScheduleModel::random_matching(Arc::new(hypercube(d).expect("valid dimension")), 11)
}

/// Random matchings on a 3-regular graph with `n` nodes.
pub fn regular_model(n: usize) -> ScheduleModel {
    ScheduleModel::random_matching(Arc::new(random_regular(n, 3, 5).expect("feasible")), 11)
}

/// `k` tokens on the first half of the nodes.
pub fn two_block(n: usize, k: i64) -> LoadVector {
    LoadVector::new((0..n).map(|u| if u < n / 2 { k } else { 0 }).collect()).expect("small loads")
}

pub fn matchings(model: &ScheduleModel, rounds: u64) -> Vec<Matching> {
    (1..=rounds).map(|t| model.matching(t)).collect()
}
