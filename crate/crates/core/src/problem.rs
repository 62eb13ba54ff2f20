//! Declarative description of a separation task.
//!
//! A [`SeparationProblem`] places a shared list of per-block observables on
//! every block of a [`BlockSpace`] and asks for unnormalized bilinear values
//! `<x_b| O^j |y_b> = target[b][j]`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{PpsError, Result};
use crate::hilbert::{is_finite, BlockSpace, CMatrix, CVector, ONE, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub label: String,
    pub matrix: CMatrix,
}

impl Observable {
    pub fn new(label: impl Into<String>, matrix: CMatrix) -> Self {
        Self {
            label: label.into(),
            matrix,
        }
    }
}

/// Desired bilinear values: one row per block, one entry per observable.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPattern {
    rows: Vec<Vec<Complex64>>,
}

impl TargetPattern {
    pub fn new(rows: Vec<Vec<Complex64>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.rows
    }

    pub fn row(&self, block: usize) -> &[Complex64] {
        &self.rows[block]
    }

    pub fn row_vector(&self, block: usize) -> CVector {
        CVector::from_column_slice(&self.rows[block])
    }

    pub fn is_zero_row(&self, block: usize) -> bool {
        self.rows[block].iter().all(|z| *z == ZERO)
    }
}

/// Target with `amplitudes[b]` at position `b` of row `b` and zero elsewhere.
pub fn delta_target(m: usize, amplitudes: &[Complex64]) -> Result<TargetPattern> {
    if amplitudes.len() != m {
        return Err(PpsError::DimensionMismatch {
            expected: m,
            found: amplitudes.len(),
        });
    }
    if let Some(index) = amplitudes.iter().position(|a| *a == ZERO) {
        return Err(PpsError::ZeroAmplitude { index });
    }
    let rows = (0..m)
        .map(|b| {
            let mut row = vec![ZERO; m];
            row[b] = amplitudes[b];
            row
        })
        .collect();
    Ok(TargetPattern { rows })
}

/// Identity delta pattern (all amplitudes one).
pub fn unit_delta_target(m: usize) -> TargetPattern {
    delta_target(m, &vec![ONE; m]).expect("unit amplitudes are nonzero")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationProblem {
    pub name: String,
    pub space: BlockSpace,
    pub observables: Vec<Observable>,
    pub target: TargetPattern,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoObservables,
    NonSquareObservable {
        observable: usize,
        rows: usize,
        cols: usize,
    },
    NonFiniteObservable {
        observable: usize,
    },
    DimensionMismatch {
        block: usize,
        observable: usize,
        block_dim: usize,
        observable_dim: usize,
    },
    TargetBlockCount {
        expected: usize,
        found: usize,
    },
    TargetRowLength {
        block: usize,
        expected: usize,
        found: usize,
    },
    NonFiniteTarget {
        block: usize,
        observable: usize,
    },
    DegenerateTarget,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoObservables => write!(f, "no observables"),
            Self::NonSquareObservable { observable, rows, cols } => {
                write!(f, "observable {} is {rows}x{cols}, not square", observable + 1)
            }
            Self::NonFiniteObservable { observable } => {
                write!(f, "observable {} has non-finite entries", observable + 1)
            }
            Self::DimensionMismatch {
                block,
                observable,
                block_dim,
                observable_dim,
            } => write!(
                f,
                "observable {} has dimension {observable_dim} but block {} has dimension {block_dim}",
                observable + 1,
                block + 1
            ),
            Self::TargetBlockCount { expected, found } => {
                write!(f, "target has {found} rows, expected one per block ({expected})")
            }
            Self::TargetRowLength { block, expected, found } => write!(
                f,
                "target row for block {} has {found} entries, expected {expected}",
                block + 1
            ),
            Self::NonFiniteTarget { block, observable } => write!(
                f,
                "target entry (block {}, observable {}) is not finite",
                block + 1,
                observable + 1
            ),
            Self::DegenerateTarget => write!(f, "target pattern is identically zero"),
        }
    }
}

impl SeparationProblem {
    pub fn new(
        name: impl Into<String>,
        space: BlockSpace,
        observables: Vec<Observable>,
        target: TargetPattern,
    ) -> Self {
        Self {
            name: name.into(),
            space,
            observables,
            target,
        }
    }

    /// Block count `p`.
    pub fn block_count(&self) -> usize {
        self.space.len()
    }

    /// Observable count `q`.
    pub fn observable_count(&self) -> usize {
        self.observables.len()
    }

    /// Number of blocks with a nonzero target row (`m`).
    pub fn separated_count(&self) -> usize {
        (0..self.target.rows().len())
            .filter(|&b| !self.target.is_zero_row(b))
            .count()
    }

    /// Every invariant violation, in a fixed order. Empty iff well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let q = self.observables.len();
        if q == 0 {
            out.push(Violation::NoObservables);
        }
        for (j, obs) in self.observables.iter().enumerate() {
            let (rows, cols) = obs.matrix.shape();
            if rows != cols {
                out.push(Violation::NonSquareObservable {
                    observable: j,
                    rows,
                    cols,
                });
                continue;
            }
            if !obs.matrix.iter().all(|&z| is_finite(z)) {
                out.push(Violation::NonFiniteObservable { observable: j });
            }
        }
        for (b, block) in self.space.blocks().iter().enumerate() {
            for (j, obs) in self.observables.iter().enumerate() {
                let (rows, cols) = obs.matrix.shape();
                if rows == cols && rows != block.dim {
                    out.push(Violation::DimensionMismatch {
                        block: b,
                        observable: j,
                        block_dim: block.dim,
                        observable_dim: rows,
                    });
                }
            }
        }
        let rows = self.target.rows();
        if rows.len() != self.space.len() {
            out.push(Violation::TargetBlockCount {
                expected: self.space.len(),
                found: rows.len(),
            });
        }
        for (b, row) in rows.iter().enumerate() {
            if row.len() != q {
                out.push(Violation::TargetRowLength {
                    block: b,
                    expected: q,
                    found: row.len(),
                });
            }
            for (j, z) in row.iter().enumerate() {
                if !is_finite(*z) {
                    out.push(Violation::NonFiniteTarget {
                        block: b,
                        observable: j,
                    });
                }
            }
        }
        if rows.iter().flatten().all(|z| *z == ZERO) {
            out.push(Violation::DegenerateTarget);
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(PpsError::InvalidProblem(v))
        }
    }

    /// The observable `j` embedded on block `b` of the total space.
    pub fn embedded_observable(&self, observable: usize, block: usize) -> Result<CMatrix> {
        crate::hilbert::embed_block_operator(&self.observables[observable].matrix, block, &self.space)
    }
}
