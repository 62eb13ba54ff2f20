//! Coefficient matrix and linear feasibility of the bilinear target system.
//!
//! Writing `v[k * n + l] = x^k y^l`, the per-block conditions
//! `sum_kl O^j_kl x^k y^l = e_j` become the linear system `M v = e` where
//! row `j` of `M` is the row-major flattening of `O^j`. Feasibility is
//! decided by comparing `rank(M)` with `rank([M | e])`.

use rayon::prelude::*;

use crate::error::{PpsError, Result};
use crate::hilbert::{full_right_svd, rank_of_values, svd_singular_values, CMatrix, CVector, ZERO};
use crate::problem::{Observable, SeparationProblem};

/// `q x n^2` matrix with entry `(j, k * n + l) = O^j[k, l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    matrix: CMatrix,
    block_dim: usize,
}

impl CoefficientMatrix {
    pub fn build(observables: &[Observable]) -> Result<Self> {
        let first = observables
            .first()
            .ok_or_else(|| PpsError::MixedDimensions("no observables".into()))?;
        let n = first.matrix.nrows();
        for obs in observables {
            if obs.matrix.shape() != (n, n) {
                return Err(PpsError::MixedDimensions(format!(
                    "{} is {}x{}, expected {n}x{n}",
                    obs.label,
                    obs.matrix.nrows(),
                    obs.matrix.ncols()
                )));
            }
        }
        let mut matrix = CMatrix::zeros(observables.len(), n * n);
        for (j, obs) in observables.iter().enumerate() {
            for k in 0..n {
                for l in 0..n {
                    matrix[(j, k * n + l)] = obs.matrix[(k, l)];
                }
            }
        }
        Ok(Self { matrix, block_dim: n })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Column holding the unknown `x^k y^l` (zero-based `k`, `l`).
    pub fn column_index(&self, k: usize, l: usize) -> usize {
        k * self.block_dim + l
    }

    /// Drops identically-zero columns; returns the kept `(k, l)` positions.
    pub fn compressed(&self) -> (CMatrix, Vec<(usize, usize)>) {
        let n = self.block_dim;
        let keep: Vec<usize> = (0..self.matrix.ncols())
            .filter(|&col| self.matrix.column(col).iter().any(|z| *z != ZERO))
            .collect();
        let mut out = CMatrix::zeros(self.matrix.nrows(), keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            out.set_column(dst, &self.matrix.column(src));
        }
        (out, keep.into_iter().map(|col| (col / n, col % n)).collect())
    }
}

/// Minimum-norm particular solution plus an orthonormal null-space basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSolutionSet {
    pub particular: CVector,
    pub nullspace: Vec<CVector>,
    /// `||M particular - e||`.
    pub residual: f64,
}

impl AffineSolutionSet {
    /// `particular + sum_i t_i nullspace_i`.
    pub fn point(&self, params: &[num_complex::Complex64]) -> CVector {
        let mut v = self.particular.clone();
        for (t, basis) in params.iter().zip(&self.nullspace) {
            v += basis * *t;
        }
        v
    }

    pub fn null_dim(&self) -> usize {
        self.nullspace.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict {
    pub block: usize,
    pub feasible: bool,
    pub rank_m: usize,
    pub rank_augmented: usize,
    pub solution: Option<AffineSolutionSet>,
}

pub fn feasibility(m: &CoefficientMatrix, e: &CVector, rel_tol: f64) -> Result<FeasibilityVerdict> {
    feasibility_for_block(m, e, rel_tol, 0)
}

fn feasibility_for_block(m: &CoefficientMatrix, e: &CVector, rel_tol: f64, block: usize) -> Result<FeasibilityVerdict> {
    let a = m.matrix();
    if e.len() != a.nrows() {
        return Err(PpsError::DimensionMismatch {
            expected: a.nrows(),
            found: e.len(),
        });
    }
    let (u, s, v) = full_right_svd(a);
    let rank_m = rank_of_values(&s, rel_tol);

    let mut augmented = CMatrix::zeros(a.nrows(), a.ncols() + 1);
    augmented.view_mut((0, 0), a.shape()).copy_from(a);
    augmented.set_column(a.ncols(), e);
    let rank_augmented = rank_of_values(&svd_singular_values(&augmented), rel_tol);

    let feasible = rank_augmented == rank_m;
    let solution = feasible.then(|| {
        let mut particular = CVector::zeros(a.ncols());
        for (i, sigma) in s.iter().enumerate().take(rank_m) {
            let coeff = u.column(i).dotc(e) / *sigma;
            particular += v.column(i) * coeff;
        }
        let nullspace = (rank_m..a.ncols()).map(|i| v.column(i).into_owned()).collect();
        let residual = (a * &particular - e).norm();
        AffineSolutionSet {
            particular,
            nullspace,
            residual,
        }
    });
    Ok(FeasibilityVerdict {
        block,
        feasible,
        rank_m,
        rank_augmented,
        solution,
    })
}

/// One verdict per block, ordered by block index.
pub fn solve_all_blocks(problem: &SeparationProblem, rel_tol: f64) -> Result<Vec<FeasibilityVerdict>> {
    problem.ensure_valid()?;
    let m = CoefficientMatrix::build(&problem.observables)?;
    (0..problem.block_count())
        .into_par_iter()
        .map(|b| feasibility_for_block(&m, &problem.target.row_vector(b), rel_tol, b))
        .collect()
}
