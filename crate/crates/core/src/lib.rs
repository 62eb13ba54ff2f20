//! Disembodiment of observables by pre- and post-selection.
//!
//! Given observables on a block-structured Hilbert space and a target
//! pattern of weak values, this crate decides whether the pattern is
//! linearly reachable ([`criterion`]), searches for product-form selection
//! states ([`factorize`]), and verifies them by direct weak-value evaluation
//! ([`weakvalue`]) and by a Gaussian-pointer measurement model ([`pointer`]).

pub mod criterion;
pub mod error;
pub mod factorize;
pub mod hilbert;
pub mod pointer;
pub mod problem;
pub mod scenarios;
pub mod weakvalue;

pub use criterion::{feasibility, solve_all_blocks, AffineSolutionSet, CoefficientMatrix, FeasibilityVerdict};
pub use error::{PpsError, Result};
pub use factorize::{
    assemble, find_rank1, solve_problem, BlockStatus, Rank1Factor, Rank1Outcome, SearchConfig, SelectionOutcome,
    SelectionPair, Solution,
};
pub use hilbert::{BlockSpace, BlockedState, CMatrix, CVector, Complex};
pub use pointer::{simulate, simulate_joint, weak_limit_check, PointerConfig, PointerOutcome};
pub use problem::{delta_target, Observable, SeparationProblem, TargetPattern, Violation};
pub use weakvalue::{apply_calibration, verify_disembodiment, weak_value, CalibrationMap, WeakValueReport};
