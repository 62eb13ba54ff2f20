//! Shared inputs for the criterion benchmarks.

use pps_core::scenarios::{random_scenario, RandomShape};
use pps_core::SeparationProblem;

/// Planted problems of the largest generator shape.
pub fn planted_batch(count: u64) -> Vec<SeparationProblem> {
    let shape = RandomShape {
        blocks: 4,
        dim: 3,
        observables: 4,
    };
    (0..count)
        .map(|seed| random_scenario(seed, shape, true).problem)
        .collect()
}
