//! Weak values, delta-pattern verification and stationary calibration maps.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{PpsError, Result};
use crate::factorize::SelectionPair;
use crate::hilbert::{covector_times, inner, svd_singular_values, BlockedState, CMatrix, CVector, ZERO};
use crate::problem::SeparationProblem;

/// Default tolerance for pattern verification.
pub const DEFAULT_PATTERN_TOL: f64 = 1e-7;
/// Default minimum `|<Phi|Psi>|`.
pub const DEFAULT_OVERLAP_TOL: f64 = 1e-9;

/// `<Phi| O |Psi> / <Phi|Psi>` with `post` a co-vector.
pub fn weak_value(post: &CVector, pre: &CVector, op: &CMatrix, overlap_tol: f64) -> Result<Complex64> {
    let overlap = inner(post, pre)?;
    if overlap.norm() <= overlap_tol {
        return Err(PpsError::PostSelectionOrthogonal { overlap });
    }
    if op.shape() != (pre.len(), pre.len()) {
        return Err(PpsError::DimensionMismatch {
            expected: pre.len(),
            found: op.nrows(),
        });
    }
    Ok(inner(post, &(op * pre))? / overlap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternEntry {
    pub observable: usize,
    pub block: usize,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakValueReport {
    /// `q x p`: entry `(j, i)` is the weak value of observable `j` on block `i`.
    pub weak_values: DMatrix<Complex64>,
    /// Same layout, unnormalized `<Phi| O |Psi>`.
    pub bilinear: DMatrix<Complex64>,
    /// Weak value at the first targeted entry of each block; `None` for
    /// blocks with an all-zero target row.
    pub amplitudes: Vec<Option<Complex64>>,
    pub pattern_ok: bool,
    pub tol: f64,
    pub overlap: Complex64,
    /// Entries that break the zero pattern: off-target entries above `tol`
    /// and targeted entries at or below it.
    pub violations: Vec<PatternEntry>,
    /// Targeted entries with `|Im| > tol`. Informational only.
    pub complex_warnings: Vec<PatternEntry>,
    /// Largest `|W_ji - s_i * target_ij|` over blocks, with `s_i` the
    /// least-squares scale of block `i`, relative to the largest `|W|`.
    pub proportionality_error: f64,
}

/// Evaluates every block-embedded weak value and checks the zero pattern of
/// the problem's target.
pub fn verify_disembodiment(
    selection: &SelectionPair,
    problem: &SeparationProblem,
    tol: f64,
) -> Result<WeakValueReport> {
    verify_states(
        &selection.post.to_flat(),
        &selection.pre.to_flat(),
        problem,
        tol,
        DEFAULT_OVERLAP_TOL,
    )
}

/// [`verify_disembodiment`] on flat total-space vectors.
pub fn verify_states(
    post: &CVector,
    pre: &CVector,
    problem: &SeparationProblem,
    tol: f64,
    overlap_tol: f64,
) -> Result<WeakValueReport> {
    problem.ensure_valid()?;
    let total = problem.space.total_dim();
    for v in [post, pre] {
        if v.len() != total {
            return Err(PpsError::DimensionMismatch {
                expected: total,
                found: v.len(),
            });
        }
    }
    let overlap = inner(post, pre)?;
    if overlap.norm() <= overlap_tol {
        return Err(PpsError::PostSelectionOrthogonal { overlap });
    }

    let q = problem.observable_count();
    let p = problem.block_count();
    let mut bilinear = DMatrix::from_element(q, p, ZERO);
    for i in 0..p {
        let offset = problem.space.offset(i)?;
        let dim = problem.space.dim(i)?;
        let x = post.rows(offset, dim);
        let y = pre.rows(offset, dim);
        for (j, obs) in problem.observables.iter().enumerate() {
            // `dot` is the unconjugated pairing.
            bilinear[(j, i)] = x.dot(&(&obs.matrix * y));
        }
    }
    let weak_values = bilinear.map(|z| z / overlap);

    let mut violations = Vec::new();
    let mut complex_warnings = Vec::new();
    let mut amplitudes = Vec::with_capacity(p);
    for i in 0..p {
        let row = problem.target.row(i);
        amplitudes.push(row.iter().position(|z| *z != ZERO).map(|j| weak_values[(j, i)]));
        for (j, t) in row.iter().enumerate() {
            let value = weak_values[(j, i)];
            let entry = PatternEntry {
                observable: j,
                block: i,
                value,
            };
            let targeted = *t != ZERO;
            if targeted != (value.norm() > tol) {
                violations.push(entry.clone());
            }
            if targeted && value.im.abs() > tol {
                complex_warnings.push(entry);
            }
        }
    }

    let scale = weak_values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..p {
        let target = problem.target.row_vector(i);
        let column = weak_values.column(i).into_owned();
        let denom = target.norm_squared();
        let fitted = if denom > 0.0 {
            target.dotc(&column) / denom
        } else {
            ZERO
        };
        worst = worst.max((column - target * fitted).norm());
    }
    let proportionality_error = if scale > 0.0 { worst / scale } else { worst };

    Ok(WeakValueReport {
        pattern_ok: violations.is_empty(),
        weak_values,
        bilinear,
        amplitudes,
        tol,
        overlap,
        violations,
        complex_warnings,
        proportionality_error,
    })
}

/// Stationary correction applied to prepared and detected states.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMap {
    pre_transform: CMatrix,
    post_transform: CMatrix,
}

const INVERTIBILITY_RATIO: f64 = 1e-12;

fn check_invertible(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(PpsError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let s = svd_singular_values(m);
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio <= INVERTIBILITY_RATIO {
        return Err(PpsError::SingularTransform { ratio });
    }
    Ok(())
}

impl CalibrationMap {
    pub fn new(pre_transform: CMatrix, post_transform: CMatrix) -> Result<Self> {
        check_invertible(&pre_transform)?;
        check_invertible(&post_transform)?;
        if pre_transform.shape() != post_transform.shape() {
            return Err(PpsError::DimensionMismatch {
                expected: pre_transform.nrows(),
                found: post_transform.nrows(),
            });
        }
        Ok(Self {
            pre_transform,
            post_transform,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            pre_transform: CMatrix::identity(dim, dim),
            post_transform: CMatrix::identity(dim, dim),
        }
    }

    pub fn pre_transform(&self) -> &CMatrix {
        &self.pre_transform
    }

    pub fn post_transform(&self) -> &CMatrix {
        &self.post_transform
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = |m: &CMatrix| {
            m.clone()
                .try_inverse()
                .ok_or(PpsError::SingularTransform { ratio: 0.0 })
        };
        Ok(Self {
            pre_transform: inv(&self.pre_transform)?,
            post_transform: inv(&self.post_transform)?,
        })
    }
}

/// `pre -> A pre`, `post -> post B` for the map's `(A, B)`.
pub fn apply_calibration(selection: &SelectionPair, map: &CalibrationMap) -> Result<SelectionPair> {
    let space = selection.pre.space();
    let dim = space.total_dim();
    if map.pre_transform.nrows() != dim {
        return Err(PpsError::DimensionMismatch {
            expected: dim,
            found: map.pre_transform.nrows(),
        });
    }
    let pre = BlockedState::from_flat(space.clone(), &(&map.pre_transform * selection.pre.to_flat()))?;
    let post = BlockedState::from_flat(
        space.clone(),
        &covector_times(&selection.post.to_flat(), &map.post_transform),
    )?;
    let overlap = inner(&post.to_flat(), &pre.to_flat())?;
    Ok(SelectionPair {
        pre,
        post,
        overlap,
        block_scales: selection.block_scales.clone(),
    })
}
