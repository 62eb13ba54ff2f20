//! Rank-1 points in an affine solution set and assembly of selection states.
//!
//! A linear solution `v` only yields physical selection states when its
//! reshaped `n x n` matrix `V[k, l] = v[k * n + l]` factors as `x y^T`. This
//! module searches the affine set `particular + span(nullspace)` for such a
//! point and turns per-block factors into a global pre/post-selection pair.
//!
//! The search solves `particular + N t - x y^T = 0` for `(t, x, y)` with a
//! damped Gauss-Newton (Levenberg-Marquardt) iteration. The residual is
//! holomorphic in all unknowns, so the complex Jacobian is used directly.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::criterion::{solve_all_blocks, AffineSolutionSet, FeasibilityVerdict};
use crate::error::{PpsError, Result};
use crate::hilbert::{inner, sorted_svd, BlockSpace, BlockedState, CMatrix, CVector, DEFAULT_REL_TOL, ONE, ZERO};
use crate::problem::SeparationProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Accept a point when `sigma_2 / sigma_1` of the reshaped matrix is at most this.
    pub rank1_tol: f64,
    pub starts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Minimum `|<Phi|Psi>|` for an assembled pair.
    pub overlap_tol: f64,
    /// Relative singular-value cutoff for the linear stage.
    pub linear_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            rank1_tol: 1e-8,
            starts: 64,
            max_iter: 500,
            seed: 0,
            overlap_tol: 1e-9,
            linear_tol: DEFAULT_REL_TOL,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rank1_tol", self.rank1_tol),
            ("overlap_tol", self.overlap_tol),
            ("linear_tol", self.linear_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PpsError::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if self.starts == 0 || self.max_iter == 0 {
            return Err(PpsError::InvalidConfig("starts and max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Independent stream for one block; does not depend on execution order.
    fn for_block(&self, block: usize) -> Self {
        let mut z = self.seed ^ (block as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Self {
            seed: z ^ (z >> 31),
            ..self.clone()
        }
    }
}

/// Block component of the post-selection co-vector (`x`) and of the
/// pre-selection ket (`y`).
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Factor {
    pub x: CVector,
    pub y: CVector,
    /// `sigma_2 / sigma_1` of the matrix the factor was extracted from.
    pub residual: f64,
}

impl Rank1Factor {
    pub fn outer(&self) -> CMatrix {
        &self.x * self.y.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rank1Outcome {
    Found(Rank1Factor),
    /// `exact` is set when the affine set is a single point, so the answer
    /// is a proof rather than a failed search.
    NotFound {
        best_residual: f64,
        exact: bool,
    },
}

impl Rank1Outcome {
    pub fn factor(&self) -> Option<&Rank1Factor> {
        match self {
            Self::Found(f) => Some(f),
            Self::NotFound { .. } => None,
        }
    }

    pub fn residual(&self) -> f64 {
        match self {
            Self::Found(f) => f.residual,
            Self::NotFound { best_residual, .. } => *best_residual,
        }
    }
}

/// Inverse of the row-major flattening: `V[k, l] = v[k * n + l]`.
pub fn reshape(v: &CVector) -> Result<CMatrix> {
    let n = (v.len() as f64).sqrt().round() as usize;
    if n * n != v.len() || n == 0 {
        return Err(PpsError::NonSquareLength(v.len()));
    }
    Ok(CMatrix::from_row_slice(n, n, v.as_slice()))
}

fn flatten(m: &CMatrix) -> CVector {
    CVector::from_iterator(m.len(), m.transpose().iter().copied())
}

/// `sigma_2 / sigma_1`; zero for the zero matrix and for `1 x 1` input.
pub fn rank1_residual(m: &CMatrix) -> f64 {
    let s = crate::hilbert::svd_singular_values(m);
    match (s.first(), s.get(1)) {
        (Some(&s1), Some(&s2)) if s1 > 0.0 => s2 / s1,
        _ => 0.0,
    }
}

/// Normalizes `x` and rotates its leading entry onto the positive real axis,
/// compensating in `y` so that `x y^T` is unchanged.
pub fn gauge_fix(x: &CVector, y: &CVector) -> (CVector, CVector) {
    let norm = x.norm();
    if norm == 0.0 {
        return (x.clone(), y.clone());
    }
    let (mut x, mut y) = (x.clone(), y.clone());
    if (norm - 1.0).abs() > 4.0 * f64::EPSILON {
        x.unscale_mut(norm);
        y.scale_mut(norm);
    }
    let cutoff = 1e-12 * x.norm();
    if let Some(k) = x.iter().position(|z| z.norm() > cutoff) {
        let lead = x[k];
        if lead.im != 0.0 || lead.re < 0.0 {
            let phase = lead.conj() / lead.norm();
            x *= phase;
            y /= phase;
            x[k] = Complex64::new(lead.norm(), 0.0);
        }
    }
    (x, y)
}

/// Top singular pair of `m` as a gauge-fixed factor.
fn factor_from_matrix(m: &CMatrix) -> Rank1Factor {
    let n = m.nrows();
    let residual = rank1_residual(m);
    let (u, s, w) = sorted_svd(m);
    if s[0] == 0.0 {
        let mut x = CVector::zeros(n);
        x[0] = ONE;
        return Rank1Factor {
            x,
            y: CVector::zeros(n),
            residual: 0.0,
        };
    }
    let x = u.column(0).into_owned();
    let y = w.column(0).map(|z| z.conj()) * Complex64::new(s[0], 0.0);
    let (x, y) = gauge_fix(&x, &y);
    Rank1Factor { x, y, residual }
}

struct Search<'a> {
    set: &'a AffineSolutionSet,
    basis: CMatrix,
    n: usize,
}

struct StartResult {
    params: CVector,
    residual: f64,
}

impl<'a> Search<'a> {
    fn new(set: &'a AffineSolutionSet, n: usize) -> Self {
        let mut basis = CMatrix::zeros(n * n, set.nullspace.len());
        for (i, b) in set.nullspace.iter().enumerate() {
            basis.set_column(i, b);
        }
        Self { set, basis, n }
    }

    fn point(&self, t: &CVector) -> CMatrix {
        let v = &self.set.particular + &self.basis * t;
        CMatrix::from_row_slice(self.n, self.n, v.as_slice())
    }

    fn residual_vector(&self, t: &CVector, x: &CVector, y: &CVector) -> CVector {
        flatten(&(self.point(t) - x * y.transpose()))
    }

    fn jacobian(&self, x: &CVector, y: &CVector) -> CMatrix {
        let n = self.n;
        let k = self.basis.ncols();
        let mut j = CMatrix::zeros(n * n, k + 2 * n);
        j.view_mut((0, 0), (n * n, k)).copy_from(&self.basis);
        for a in 0..n {
            for l in 0..n {
                j[(a * n + l, k + a)] = -y[l];
            }
        }
        for row in 0..n {
            for b in 0..n {
                j[(row * n + b, k + n + b)] = -x[row];
            }
        }
        j
    }

    fn run(&self, start: CVector, config: &SearchConfig) -> StartResult {
        let n = self.n;
        let k = self.basis.ncols();
        let mut t = start;
        let init = factor_from_matrix(&self.point(&t));
        let (mut x, mut y) = if init.y.iter().all(|z| *z == ZERO) {
            (CVector::repeat(n, ONE), CVector::repeat(n, ONE))
        } else {
            (init.x, init.y)
        };

        let mut r = self.residual_vector(&t, &x, &y);
        let mut cost = r.norm_squared();
        let mut mu = -1.0;
        let target = config.rank1_tol * 1e-4;
        let mut stalled = 0;

        for _ in 0..config.max_iter {
            let ratio = rank1_residual(&self.point(&t));
            if ratio <= target || cost == 0.0 {
                break;
            }
            let jac = self.jacobian(&x, &y);
            let jh = jac.adjoint();
            let normal = &jh * &jac;
            let grad = &jh * &r;
            if mu < 0.0 {
                let max_diag = (0..normal.nrows()).map(|i| normal[(i, i)].re).fold(0.0, f64::max);
                mu = 1e-3 * max_diag.max(1e-12);
            }
            let mut improved = false;
            for _ in 0..40 {
                let mut damped = normal.clone();
                for i in 0..damped.nrows() {
                    damped[(i, i)] += Complex64::new(mu, 0.0);
                }
                let Some(chol) = damped.cholesky() else {
                    mu *= 4.0;
                    continue;
                };
                let step = chol.solve(&(-&grad));
                let t_new = &t + step.rows(0, k);
                let x_new = &x + step.rows(k, n);
                let y_new = &y + step.rows(k + n, n);
                let r_new = self.residual_vector(&t_new, &x_new, &y_new);
                let cost_new = r_new.norm_squared();
                if cost_new < cost {
                    if cost - cost_new <= 1e-14 * cost {
                        stalled += 1;
                    } else {
                        stalled = 0;
                    }
                    t = t_new;
                    let scale = x_new.norm();
                    x = x_new.unscale(scale);
                    y = y_new.scale(scale);
                    r = r_new;
                    cost = cost_new;
                    mu = (mu / 3.0).max(1e-300);
                    improved = true;
                    break;
                }
                mu *= 4.0;
            }
            if !improved || stalled >= 8 {
                break;
            }
        }
        let residual = rank1_residual(&self.point(&t));
        StartResult { params: t, residual }
    }
}

/// Searches the affine set for a point whose reshaped matrix has rank one.
///
/// Start 0 is the particular solution itself; further starts are drawn from
/// a seeded complex Gaussian scaled to the particular solution. The first
/// start meeting `rank1_tol` wins; otherwise the lowest residual is reported.
pub fn find_rank1(set: &AffineSolutionSet, config: &SearchConfig) -> Result<Rank1Outcome> {
    config.validate()?;
    let point0 = reshape(&set.particular)?;
    let n = point0.nrows();
    for b in &set.nullspace {
        if b.len() != n * n {
            return Err(PpsError::DimensionMismatch {
                expected: n * n,
                found: b.len(),
            });
        }
    }
    if set.particular.iter().all(|z| *z == ZERO) {
        return Ok(Rank1Outcome::Found(factor_from_matrix(&point0)));
    }
    if set.nullspace.is_empty() {
        let ratio = rank1_residual(&point0);
        return Ok(if ratio <= config.rank1_tol {
            Rank1Outcome::Found(factor_from_matrix(&point0))
        } else {
            Rank1Outcome::NotFound {
                best_residual: ratio,
                exact: true,
            }
        });
    }

    let search = Search::new(set, n);
    let k = set.nullspace.len();
    let scale = set.particular.norm().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<StartResult> = None;
    for start in 0..config.starts {
        let t0 = if start == 0 {
            CVector::zeros(k)
        } else {
            let spread = scale * (k as f64).sqrt().recip();
            DVector::from_fn(k, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * spread
            })
        };
        let result = search.run(t0, config);
        if result.residual <= config.rank1_tol {
            let m = search.point(&result.params);
            return Ok(Rank1Outcome::Found(factor_from_matrix(&m)));
        }
        if best.as_ref().is_none_or(|b| result.residual < b.residual) {
            best = Some(result);
        }
    }
    Ok(Rank1Outcome::NotFound {
        best_residual: best.map_or(f64::INFINITY, |b| b.residual),
        exact: false,
    })
}

/// Global pre/post-selection built from per-block factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPair {
    /// `|Psi>`.
    pub pre: BlockedState,
    /// `<Phi|` as a co-vector.
    pub post: BlockedState,
    /// Bilinear `<Phi|Psi>`.
    pub overlap: Complex64,
    /// Factor applied to each block's `y` during assembly (1 unless a
    /// rescale was needed to avoid a vanishing overlap).
    pub block_scales: Vec<Complex64>,
}

impl SelectionPair {
    /// Pair from flat vectors with unit block scales.
    pub fn from_flat(space: &BlockSpace, post: &CVector, pre: &CVector) -> Result<Self> {
        let post = BlockedState::from_flat(space.clone(), post)?;
        let pre = BlockedState::from_flat(space.clone(), pre)?;
        let overlap = inner(&post.to_flat(), &pre.to_flat())?;
        Ok(Self {
            pre,
            post,
            overlap,
            block_scales: vec![ONE; space.len()],
        })
    }
}

pub fn assemble(factors: &[Rank1Factor], space: &BlockSpace, config: &SearchConfig) -> Result<SelectionPair> {
    if factors.len() != space.len() {
        return Err(PpsError::FactorCount {
            expected: space.len(),
            found: factors.len(),
        });
    }
    let block_overlaps = factors.iter().map(|f| inner(&f.x, &f.y)).collect::<Result<Vec<_>>>()?;
    let base: Complex64 = block_overlaps.iter().sum();

    let p = factors.len();
    let mut scales = vec![ONE; p];
    if base.norm() <= config.overlap_tol {
        let mut found = false;
        for attempt in 0..2 * p {
            let block = attempt % p;
            if factors[block].y.iter().all(|z| *z == ZERO) {
                continue;
            }
            let factor = Complex64::new((attempt / p + 2) as f64, 0.0);
            let candidate = base + block_overlaps[block] * (factor - ONE);
            if candidate.norm() > config.overlap_tol {
                scales[block] = factor;
                found = true;
                break;
            }
        }
        if !found {
            return Err(PpsError::OrthogonalSelections);
        }
    }

    let post = BlockedState::new(space.clone(), factors.iter().map(|f| f.x.clone()).collect())?;
    let pre = BlockedState::new(
        space.clone(),
        factors.iter().zip(&scales).map(|(f, s)| &f.y * *s).collect(),
    )?;
    let overlap = inner(&post.to_flat(), &pre.to_flat())?;
    Ok(SelectionPair {
        pre,
        post,
        overlap,
        block_scales: scales,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockStatus {
    LinearInfeasible,
    Rank1NotFound { best_residual: f64, exact: bool },
    Solved,
}

impl BlockStatus {
    pub fn code(&self) -> &'static str {
        match self {
            Self::LinearInfeasible => "LINEAR_INFEASIBLE",
            Self::Rank1NotFound { .. } => "RANK1_NOT_FOUND",
            Self::Solved => "SOLVED",
        }
    }
}

impl fmt::Display for BlockStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectionOutcome {
    Assembled(SelectionPair),
    /// At least one block is not solved.
    Incomplete,
    /// All blocks solved but every rescale left `<Phi|Psi>` below tolerance.
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub verdicts: Vec<FeasibilityVerdict>,
    pub outcomes: Vec<Option<Rank1Outcome>>,
    pub diagnosis: Vec<BlockStatus>,
    pub selection: SelectionOutcome,
}

impl Solution {
    pub fn all_solved(&self) -> bool {
        self.diagnosis.iter().all(|d| *d == BlockStatus::Solved)
    }

    pub fn selection(&self) -> Option<&SelectionPair> {
        match &self.selection {
            SelectionOutcome::Assembled(pair) => Some(pair),
            _ => None,
        }
    }

    pub fn factors(&self) -> Vec<Option<&Rank1Factor>> {
        self.outcomes
            .iter()
            .map(|o| o.as_ref().and_then(Rank1Outcome::factor))
            .collect()
    }
}

/// Linear stage, per-block rank-1 search, then assembly.
pub fn solve_problem(problem: &SeparationProblem, config: &SearchConfig) -> Result<Solution> {
    config.validate()?;
    let verdicts = solve_all_blocks(problem, config.linear_tol)?;
    let outcomes: Vec<Option<Rank1Outcome>> = verdicts
        .par_iter()
        .map(|v| {
            v.solution
                .as_ref()
                .map(|set| find_rank1(set, &config.for_block(v.block)))
                .transpose()
        })
        .collect::<Result<_>>()?;
    let diagnosis: Vec<BlockStatus> = outcomes
        .iter()
        .map(|o| match o {
            None => BlockStatus::LinearInfeasible,
            Some(Rank1Outcome::Found(_)) => BlockStatus::Solved,
            Some(Rank1Outcome::NotFound { best_residual, exact }) => BlockStatus::Rank1NotFound {
                best_residual: *best_residual,
                exact: *exact,
            },
        })
        .collect();

    let selection = if diagnosis.iter().all(|d| *d == BlockStatus::Solved) {
        let factors: Vec<Rank1Factor> = outcomes
            .iter()
            .filter_map(|o| o.as_ref().and_then(Rank1Outcome::factor).cloned())
            .collect();
        match assemble(&factors, &problem.space, config) {
            Ok(pair) => SelectionOutcome::Assembled(pair),
            Err(PpsError::OrthogonalSelections) => SelectionOutcome::Orthogonal,
            Err(e) => return Err(e),
        }
    } else {
        SelectionOutcome::Incomplete
    };

    Ok(Solution {
        verdicts,
        outcomes,
        diagnosis,
        selection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{c, cvec, rvec, I};

    fn affine(particular: CVector, nullspace: Vec<CVector>) -> AffineSolutionSet {
        AffineSolutionSet {
            particular,
            nullspace,
            residual: 0.0,
        }
    }

    fn unit(len: usize, at: usize) -> CVector {
        let mut v = CVector::zeros(len);
        v[at] = ONE;
        v
    }

    #[test]
    fn reshape_examples() {
        let d = reshape(&rvec(&[0.5, 0.0, 0.0, 0.5])).unwrap();
        assert_eq!(d, CMatrix::from_diagonal(&rvec(&[0.5, 0.5])));
        let h = c(0.0, 0.5);
        let anti = reshape(&cvec(&[ZERO, h, -h, ZERO])).unwrap();
        assert_eq!(anti[(0, 1)], h);
        assert_eq!(anti[(1, 0)], -h);
        assert_eq!(reshape(&CVector::zeros(9)).unwrap(), CMatrix::zeros(3, 3));
        assert!(matches!(reshape(&CVector::zeros(3)), Err(PpsError::NonSquareLength(3))));
    }

    #[test]
    fn completes_diagonal_with_free_off_diagonals() {
        let set = affine(rvec(&[0.5, 0.0, 0.0, 0.5]), vec![unit(4, 1), unit(4, 2)]);
        let out = find_rank1(&set, &SearchConfig::default()).unwrap();
        let f = out.factor().expect("rank-1 completion exists");
        assert!(f.residual <= 1e-8);
        let v = f.outer();
        assert!((v[(0, 0)] - c(0.5, 0.0)).norm() < 1e-7);
        assert!((v[(1, 1)] - c(0.5, 0.0)).norm() < 1e-7);
        assert!((v[(0, 1)] * v[(1, 0)] - c(0.25, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn single_point_of_rank_two_is_exactly_not_found() {
        let set = affine(rvec(&[0.5, 0.0, 0.0, 0.5]), vec![]);
        match find_rank1(&set, &SearchConfig::default()).unwrap() {
            Rank1Outcome::NotFound { best_residual, exact } => {
                assert!(exact);
                assert!((best_residual - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_point_of_rank_one_is_found_exactly() {
        let x = cvec(&[ONE, I]);
        let y = rvec(&[2.0, -1.0]);
        let set = affine(flatten(&(&x * y.transpose())), vec![]);
        let f = find_rank1(&set, &SearchConfig::default()).unwrap();
        let f = f.factor().unwrap();
        assert!(f.residual < 1e-15);
        assert!((f.outer() - &x * y.transpose()).norm() < 1e-12);
    }

    #[test]
    fn gauge_is_fixed_and_idempotent() {
        let x = cvec(&[ZERO, c(-3.0, 4.0), c(1.0, 1.0)]);
        let y = cvec(&[c(1.0, 0.5), ONE, c(0.0, -2.0)]);
        let (gx, gy) = gauge_fix(&x, &y);
        assert!((gx.norm() - 1.0).abs() < 1e-15);
        assert_eq!(gx[0], ZERO);
        assert_eq!(gx[1].im, 0.0);
        assert!(gx[1].re > 0.0);
        assert!((&gx * gy.transpose() - &x * y.transpose()).norm() < 1e-12);
        let (gx2, gy2) = gauge_fix(&gx, &gy);
        assert_eq!((gx2, gy2), (gx, gy));
    }

    fn single_factor(x: &[f64], y: &[f64]) -> Rank1Factor {
        Rank1Factor {
            x: rvec(x),
            y: rvec(y),
            residual: 0.0,
        }
    }

    #[test]
    fn assembly_rescales_cancelling_blocks() {
        let space = BlockSpace::uniform("p", 2, 1).unwrap();
        let factors = [single_factor(&[1.0], &[1.0]), single_factor(&[1.0], &[-1.0])];
        let pair = assemble(&factors, &space, &SearchConfig::default()).unwrap();
        assert!(pair.overlap.norm() > 1e-9);
        assert_eq!(pair.block_scales, vec![c(2.0, 0.0), ONE]);
        assert_eq!(pair.overlap, ONE);
    }

    #[test]
    fn assembly_single_block_keeps_overlap() {
        let space = BlockSpace::uniform("p", 1, 2).unwrap();
        let f = single_factor(&[0.6, 0.8], &[1.0, 2.0]);
        let pair = assemble(&[f], &space, &SearchConfig::default()).unwrap();
        assert!((pair.overlap - c(2.2, 0.0)).norm() < 1e-15);
        assert_eq!(pair.block_scales, vec![ONE]);
    }

    #[test]
    fn assembly_fails_when_no_rescale_helps() {
        let space = BlockSpace::uniform("p", 1, 2).unwrap();
        let f = single_factor(&[1.0, 0.0], &[0.0, 1.0]);
        assert!(matches!(
            assemble(&[f], &space, &SearchConfig::default()),
            Err(PpsError::OrthogonalSelections)
        ));
        assert!(matches!(
            assemble(&[], &space, &SearchConfig::default()),
            Err(PpsError::FactorCount { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = SearchConfig {
            starts: 0,
            ..SearchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SearchConfig {
            rank1_tol: -1.0,
            ..SearchConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn block_seeds_differ_and_repeat() {
        let cfg = SearchConfig::with_seed(7);
        assert_ne!(cfg.for_block(0).seed, cfg.for_block(1).seed);
        assert_eq!(cfg.for_block(3), cfg.for_block(3));
    }
}
