//! Complex linear algebra substrate and the block-structured state space.
//!
//! Vectors and matrices are plain `nalgebra` containers over `Complex64`.
//! Post-selection states are stored as co-vectors: their entries pair with a
//! ket bilinearly, `sum_k bra[k] * ket[k]`, with no conjugation. Use
//! [`to_covector`] to turn a post-selection ket into that form.
//!
//! Flattening is row-major everywhere: entry `(k, l)` of an `n x n` matrix
//! sits at flat index `k * n + l` (zero-based).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{PpsError, Result};

pub type Complex = Complex64;
pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative singular-value cutoff shared by rank and feasibility decisions.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cvec(entries: &[Complex64]) -> CVector {
    CVector::from_column_slice(entries)
}

pub fn rvec(entries: &[f64]) -> CVector {
    CVector::from_iterator(entries.len(), entries.iter().map(|&r| c(r, 0.0)))
}

/// Row-major construction.
pub fn cmat(rows: usize, cols: usize, entries: &[Complex64]) -> CMatrix {
    CMatrix::from_row_slice(rows, cols, entries)
}

pub fn rdiag(entries: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&rvec(entries))
}

pub fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Bilinear pairing `sum_k bra[k] * ket[k]`.
pub fn inner(bra: &CVector, ket: &CVector) -> Result<Complex64> {
    if bra.len() != ket.len() {
        return Err(PpsError::DimensionMismatch {
            expected: bra.len(),
            found: ket.len(),
        });
    }
    Ok(bra.iter().zip(ket.iter()).map(|(a, b)| a * b).sum())
}

/// Entry-wise conjugate: the co-vector of a ket.
pub fn to_covector(ket: &CVector) -> CVector {
    ket.map(|z| z.conj())
}

/// Co-vector times matrix, `(bra^T M)^T`.
pub fn covector_times(bra: &CVector, m: &CMatrix) -> CVector {
    m.transpose() * bra
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Returns `(W, s, V)` where `V` is the full `cols x cols` unitary, the
/// columns of `W = A V` are mutually orthogonal and `s[j] = |W[:, j]|`.
/// Columns come out sorted by nonincreasing `s`.
fn jacobi_svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    const MAX_SWEEPS: usize = 80;
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = CMatrix::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                // [p q] <- [p q] [[c, s e^{i phi}], [-s e^{-i phi}, c]]
                let s_fwd = phase * sn;
                let s_back = phase.conj() * sn;
                rotate_columns(&mut a, p, q, cs, s_fwd, s_back);
                rotate_columns(&mut v, p, q, cs, s_fwd, s_back);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));
    let mut w = CMatrix::zeros(m.nrows(), n);
    let mut vs = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        w.set_column(dst, &a.column(src));
        vs.set_column(dst, &v.column(src));
        s.push(norms[src]);
    }
    (w, s, vs)
}

fn rotate_columns(m: &mut CMatrix, p: usize, q: usize, cs: f64, s_fwd: Complex64, s_back: Complex64) {
    for r in 0..m.nrows() {
        let ap = m[(r, p)];
        let aq = m[(r, q)];
        m[(r, p)] = ap * cs - aq * s_back;
        m[(r, q)] = ap * s_fwd + aq * cs;
    }
}

/// Thin SVD with singular values sorted in nonincreasing order.
///
/// Returns `(U, s, V)` with `A = U diag(s) V^H`, `U` of shape `rows x r`,
/// `V` of shape `cols x r`, `r = min(rows, cols)`. Left vectors belonging
/// to zero singular values are left as zero columns.
pub(crate) fn sorted_svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let r = m.nrows().min(m.ncols());
    let (u, s, v) = full_right_svd(m);
    (
        u.columns(0, r).into_owned(),
        s[..r].to_vec(),
        v.columns(0, r).into_owned(),
    )
}

/// Full right singular basis (`cols x cols`) with singular values padded by
/// zeros to length `cols`; `U` is `rows x cols`.
pub(crate) fn full_right_svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (mut w, mut s, v) = jacobi_svd(m);
    for (j, sv) in s.iter_mut().enumerate() {
        // At most `rows` columns of A V are nonzero; the rest are rounding.
        if j >= m.nrows() {
            *sv = 0.0;
        }
        if *sv > 0.0 {
            let scale = *sv;
            w.column_mut(j).unscale_mut(scale);
        } else {
            w.column_mut(j).fill(ZERO);
        }
    }
    (w, s, v)
}

pub fn svd_singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let r = m.nrows().min(m.ncols());
    // Jacobi on the shorter side: fewer column pairs.
    let (_, s, _) = if m.nrows() < m.ncols() {
        jacobi_svd(&m.adjoint())
    } else {
        jacobi_svd(m)
    };
    s[..r].to_vec()
}

pub(crate) fn rank_of_values(s: &[f64], rel_tol: f64) -> usize {
    let max = s.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * max).count()
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    rank_of_values(&svd_singular_values(m), rel_tol)
}

/// Kronecker product, first factor's index major.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub dim: usize,
}

/// Ordered direct sum of labelled blocks (paths or path configurations).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpace {
    blocks: Vec<Block>,
    offsets: Vec<usize>,
    total_dim: usize,
}

impl BlockSpace {
    pub fn new<S: Into<String>>(blocks: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let blocks: Vec<Block> = blocks
            .into_iter()
            .map(|(label, dim)| Block {
                label: label.into(),
                dim,
            })
            .collect();
        if blocks.is_empty() {
            return Err(PpsError::InvalidBlockSpace("no blocks".into()));
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0;
        for (i, b) in blocks.iter().enumerate() {
            if b.dim == 0 {
                return Err(PpsError::InvalidBlockSpace(format!(
                    "block {} ({}) has dimension 0",
                    i + 1,
                    b.label
                )));
            }
            if blocks[..i].iter().any(|other| other.label == b.label) {
                return Err(PpsError::InvalidBlockSpace(format!(
                    "duplicate block label {:?}",
                    b.label
                )));
            }
            offsets.push(total);
            total += b.dim;
        }
        Ok(Self {
            blocks,
            offsets,
            total_dim: total,
        })
    }

    /// `count` blocks of equal dimension labelled `prefix1`, `prefix2`, ...
    pub fn uniform(prefix: &str, count: usize, dim: usize) -> Result<Self> {
        Self::new((1..=count).map(|i| (format!("{prefix}{i}"), dim)))
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn dim(&self, index: usize) -> Result<usize> {
        self.check_index(index)?;
        Ok(self.blocks[index].dim)
    }

    pub fn offset(&self, index: usize) -> Result<usize> {
        self.check_index(index)?;
        Ok(self.offsets[index])
    }

    /// Maps a total-space index to `(block, intra-block index)`.
    pub fn locate(&self, flat: usize) -> Option<(usize, usize)> {
        if flat >= self.total_dim {
            return None;
        }
        let block = self.offsets.partition_point(|&o| o <= flat) - 1;
        Some((block, flat - self.offsets[block]))
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.blocks.len() {
            return Err(PpsError::BlockIndexOutOfRange {
                index,
                blocks: self.blocks.len(),
            });
        }
        Ok(())
    }
}

/// Direct-sum embedding: `op` on block `block_index`, zero elsewhere.
pub fn embed_block_operator(op: &CMatrix, block_index: usize, space: &BlockSpace) -> Result<CMatrix> {
    let dim = space.dim(block_index)?;
    if op.nrows() != dim || op.ncols() != dim {
        return Err(PpsError::DimensionMismatch {
            expected: dim,
            found: if op.nrows() != dim { op.nrows() } else { op.ncols() },
        });
    }
    let offset = space.offset(block_index)?;
    let n = space.total_dim();
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((offset, offset), (dim, dim)).copy_from(op);
    Ok(out)
}

/// A state split into per-block components.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedState {
    space: BlockSpace,
    components: Vec<CVector>,
}

impl BlockedState {
    pub fn new(space: BlockSpace, components: Vec<CVector>) -> Result<Self> {
        if components.len() != space.len() {
            return Err(PpsError::DimensionMismatch {
                expected: space.len(),
                found: components.len(),
            });
        }
        for (b, comp) in space.blocks().iter().zip(&components) {
            if comp.len() != b.dim {
                return Err(PpsError::DimensionMismatch {
                    expected: b.dim,
                    found: comp.len(),
                });
            }
            if !comp.iter().all(|&z| is_finite(z)) {
                return Err(PpsError::InvalidState(format!("non-finite entry in block {}", b.label)));
            }
        }
        if components.iter().all(|v| v.iter().all(|z| *z == ZERO)) {
            return Err(PpsError::InvalidState("all components are zero".into()));
        }
        Ok(Self { space, components })
    }

    pub fn from_flat(space: BlockSpace, flat: &CVector) -> Result<Self> {
        if flat.len() != space.total_dim() {
            return Err(PpsError::DimensionMismatch {
                expected: space.total_dim(),
                found: flat.len(),
            });
        }
        let components = space
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| flat.rows(space.offsets[i], b.dim).into_owned())
            .collect();
        Self::new(space, components)
    }

    pub fn to_flat(&self) -> CVector {
        let mut out = CVector::zeros(self.space.total_dim());
        for (i, comp) in self.components.iter().enumerate() {
            out.rows_mut(self.space.offsets[i], comp.len()).copy_from(comp);
        }
        out
    }

    pub fn space(&self) -> &BlockSpace {
        &self.space
    }

    pub fn components(&self) -> &[CVector] {
        &self.components
    }

    pub fn component(&self, block: usize) -> &CVector {
        &self.components[block]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_z() -> CMatrix {
        rdiag(&[1.0, -1.0])
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&rvec(&[1.0, 0.0]), &rvec(&[0.0, 1.0])).unwrap(), ZERO);
        let v = inner(&rvec(&[0.5, 0.5, 0.5, -0.5]), &rvec(&[0.5, 0.5, 0.5, 0.5])).unwrap();
        assert_eq!(v, c(0.5, 0.0));
        assert_eq!(inner(&cvec(&[I]), &cvec(&[I])).unwrap(), c(-1.0, 0.0));
        assert!(matches!(
            inner(&rvec(&[1.0]), &rvec(&[1.0, 2.0])),
            Err(PpsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn singular_value_examples() {
        assert_eq!(svd_singular_values(&CMatrix::identity(2, 2)), vec![1.0, 1.0]);
        assert_eq!(svd_singular_values(&CMatrix::zeros(3, 2)), vec![0.0, 0.0]);
    }

    #[test]
    fn rank_examples() {
        let m = cmat(2, 2, &[ONE, ONE, ONE, -ONE]);
        assert_eq!(rank(&m, DEFAULT_REL_TOL), 2);
        assert_eq!(rank(&CMatrix::zeros(3, 4), DEFAULT_REL_TOL), 0);
        let singular = cmat(2, 2, &[ONE, ONE, ONE, ONE]);
        assert_eq!(rank(&singular, DEFAULT_REL_TOL), 1);
    }

    #[test]
    fn embedding_examples() {
        let space = BlockSpace::uniform("path", 2, 2).unwrap();
        let id = embed_block_operator(&CMatrix::identity(2, 2), 0, &space).unwrap();
        assert_eq!(id, rdiag(&[1.0, 1.0, 0.0, 0.0]));
        let z = embed_block_operator(&sigma_z(), 1, &space).unwrap();
        assert_eq!(z, rdiag(&[0.0, 0.0, 1.0, -1.0]));

        let single = BlockSpace::new([("all", 8)]).unwrap();
        let pattern = rdiag(&[1.0, 1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(embed_block_operator(&pattern, 0, &single).unwrap(), pattern);

        assert!(matches!(
            embed_block_operator(&sigma_z(), 2, &space),
            Err(PpsError::BlockIndexOutOfRange { .. })
        ));
        assert!(matches!(
            embed_block_operator(&CMatrix::identity(3, 3), 0, &space),
            Err(PpsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn tensor_examples() {
        let id2 = CMatrix::identity(2, 2);
        assert_eq!(tensor(&id2, &id2), CMatrix::identity(4, 4));
        assert_eq!(tensor(&rdiag(&[1.0, 0.0]), &id2), rdiag(&[1.0, 1.0, 0.0, 0.0]));
        assert_eq!(tensor(&sigma_z(), &sigma_z()), rdiag(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn block_space_rejects_bad_layouts() {
        assert!(BlockSpace::new([("a", 2), ("a", 2)]).is_err());
        assert!(BlockSpace::new([("a", 0)]).is_err());
        assert!(BlockSpace::new(Vec::<(String, usize)>::new()).is_err());
        let s = BlockSpace::new([("a", 2), ("b", 3)]).unwrap();
        assert_eq!(s.total_dim(), 5);
        assert_eq!(s.locate(0), Some((0, 0)));
        assert_eq!(s.locate(2), Some((1, 0)));
        assert_eq!(s.locate(4), Some((1, 2)));
        assert_eq!(s.locate(5), None);
    }

    #[test]
    fn blocked_state_flat_round_trip() {
        let space = BlockSpace::uniform("p", 2, 2).unwrap();
        let flat = rvec(&[0.5, 0.5, 0.5, -0.5]);
        let st = BlockedState::from_flat(space.clone(), &flat).unwrap();
        assert_eq!(st.component(1), &rvec(&[0.5, -0.5]));
        assert_eq!(st.to_flat(), flat);
        assert!(BlockedState::from_flat(space, &CVector::zeros(4)).is_err());
    }

    #[test]
    fn svd_reconstructs_nearly_rank_one_matrix() {
        // Nearly rank-one complex 2x2 input on which a plain bidiagonal SVD
        // loses accuracy in the singular vectors.
        let m = cmat(
            2,
            2,
            &[
                c(0.49999999999999994, 0.0),
                c(0.16548152058586524, 0.2992156312721953),
                c(0.3538527034935046, -0.6398192358751984),
                c(0.5000000000000002, 0.0),
            ],
        );
        let (u, s, v) = sorted_svd(&m);
        let sd = CMatrix::from_diagonal(&rvec(&s));
        assert!((&u * sd * v.adjoint() - &m).norm() < 1e-14);
        assert!(s[1] / s[0] < 1e-11);
    }

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        for (rows, cols) in [(5, 3), (3, 5), (4, 4), (1, 6)] {
            let m = CMatrix::from_fn(rows, cols, |i, j| {
                c((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0)
            });
            let (u, s, v) = sorted_svd(&m);
            let sd = CMatrix::from_diagonal(&rvec(&s));
            assert!((&u * sd * v.adjoint() - &m).norm() < 1e-12, "{rows}x{cols}");
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
            let (_, _, vf) = full_right_svd(&m);
            assert!((vf.adjoint() * &vf - CMatrix::identity(cols, cols)).norm() < 1e-12);
        }
    }

    #[test]
    fn full_right_basis_of_wide_matrix() {
        let m = cmat(2, 4, &[ONE, ZERO, ZERO, ONE, ONE, ZERO, ZERO, -ONE]);
        let (_, s, v) = full_right_svd(&m);
        assert_eq!(v.shape(), (4, 4));
        assert_eq!(s.len(), 4);
        let gram = v.adjoint() * &v;
        assert!((gram - CMatrix::identity(4, 4)).norm() < 1e-12);
    }
}
