use num_complex::Complex64;
use thiserror::Error;

use crate::problem::Violation;

pub type Result<T> = std::result::Result<T, PpsError>;

#[derive(Debug, Clone, Error)]
pub enum PpsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("block index {index} out of range for a space with {blocks} blocks")]
    BlockIndexOutOfRange { index: usize, blocks: usize },

    #[error("invalid block space: {0}")]
    InvalidBlockSpace(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("target amplitude {index} is zero")]
    ZeroAmplitude { index: usize },

    #[error("vector length {0} is not a perfect square")]
    NonSquareLength(usize),

    #[error("operators of mixed dimensions: {0}")]
    MixedDimensions(String),

    #[error("problem is not well-formed: {}", format_violations(.0))]
    InvalidProblem(Vec<Violation>),

    #[error("post-selection is orthogonal to pre-selection (|<Phi|Psi>| = {:.3e})", .overlap.norm())]
    PostSelectionOrthogonal { overlap: Complex64 },

    #[error("no block rescaling produced a non-orthogonal selection pair")]
    OrthogonalSelections,

    #[error("transform is singular (condition ratio {ratio:.3e})")]
    SingularTransform { ratio: f64 },

    #[error("operator is not diagonalizable")]
    NotDiagonalizable,

    #[error("expected {expected} rank-1 factors, got {found}")]
    FactorCount { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
