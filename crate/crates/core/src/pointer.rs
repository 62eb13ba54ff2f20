//! Von Neumann measurement with a Gaussian pointer, evaluated in closed form.
//!
//! The pointer starts in `phi(x) ~ exp(-x^2 / (4 sigma^2))` and the coupling
//! `exp(-i g O (x) p)` is applied once (impulsive limit, hbar = 1). With
//! `O = sum_k lambda_k |k><k~|` the post-selected pointer is
//!
//! ```text
//! psi(x) = sum_k c_k phi(x - g lambda_k),   c_k = <Phi|k> <k~|Psi>
//! ```
//!
//! and all moments follow from the Gaussian overlap
//! `int conj(phi(x - a)) phi(x - b) dx = exp(-(conj(a) - b)^2 / (8 sigma^2))`.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{PpsError, Result};
use crate::hilbert::{inner, svd_singular_values, CMatrix, CVector, ZERO};
use crate::weakvalue::{weak_value, DEFAULT_OVERLAP_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerConfig {
    /// Position spread of the initial pointer.
    pub sigma: f64,
    /// Coupling strength.
    pub g: f64,
}

impl PointerConfig {
    pub fn new(sigma: f64, g: f64) -> Result<Self> {
        let cfg = Self { sigma, g };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !self.g.is_finite() {
            return Err(PpsError::InvalidConfig(format!(
                "pointer needs sigma > 0 and finite g (sigma = {}, g = {})",
                self.sigma, self.g
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerOutcome {
    pub mean_position_shift: f64,
    pub mean_momentum_shift: f64,
    pub postselection_probability: f64,
}

/// Right eigenvectors as columns and the matching dual rows.
struct Spectrum {
    values: Vec<Complex64>,
    right: CMatrix,
    dual: CMatrix,
}

const HERMITIAN_TOL: f64 = 1e-12;
const DIAGONALIZABLE_RATIO: f64 = 1e-10;

fn spectrum(op: &CMatrix) -> Result<Spectrum> {
    if !op.is_square() {
        return Err(PpsError::DimensionMismatch {
            expected: op.nrows(),
            found: op.ncols(),
        });
    }
    let scale = op.norm().max(1.0);
    if (op - op.adjoint()).norm() <= HERMITIAN_TOL * scale {
        let hermitian = (op + op.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(hermitian);
        return Ok(Spectrum {
            values: eig.eigenvalues.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            dual: eig.eigenvectors.adjoint(),
            right: eig.eigenvectors,
        });
    }
    // General case: Schur form T = Q^H op Q, eigenvectors of T by
    // back-substitution.
    let (q, t) = op.clone().schur().unpack();
    let n = t.nrows();
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let denom = t[(i, i)] - values[k];
            if denom.norm() <= 1e-14 * scale {
                if acc.norm() <= 1e-12 * scale {
                    continue;
                }
                return Err(PpsError::NotDiagonalizable);
            }
            y[(i, k)] = -acc / denom;
        }
        let norm = y.column(k).norm();
        y.column_mut(k).unscale_mut(norm);
    }
    let right = q * y;
    let s = svd_singular_values(&right);
    if s.last().copied().unwrap_or(0.0) <= DIAGONALIZABLE_RATIO * s[0] {
        return Err(PpsError::NotDiagonalizable);
    }
    let dual = right.clone().try_inverse().ok_or(PpsError::NotDiagonalizable)?;
    Ok(Spectrum { values, right, dual })
}

fn normalized(v: &CVector) -> CVector {
    let n = v.norm();
    if n > 0.0 {
        v.unscale(n)
    } else {
        v.clone()
    }
}

/// Post-selected pointer readout for the coupling `g * op`.
pub fn simulate(post: &CVector, pre: &CVector, op: &CMatrix, cfg: &PointerConfig) -> Result<PointerOutcome> {
    cfg.validate()?;
    if post.len() != pre.len() || op.nrows() != pre.len() {
        return Err(PpsError::DimensionMismatch {
            expected: pre.len(),
            found: if post.len() != pre.len() {
                post.len()
            } else {
                op.nrows()
            },
        });
    }
    let spec = spectrum(op)?;
    let post = normalized(post);
    let pre = normalized(pre);

    let n = spec.values.len();
    let amps: Vec<Complex64> = (0..n)
        .map(|k| {
            let onto = inner(&post, &spec.right.column(k).into_owned()).expect("matching dims");
            let from = (spec.dual.row(k) * &pre)[(0, 0)];
            onto * from
        })
        .collect();
    let shifts: Vec<Complex64> = spec.values.iter().map(|&l| l * cfg.g).collect();

    let var8 = 8.0 * cfg.sigma * cfg.sigma;
    let mut norm = ZERO;
    let mut position = ZERO;
    let mut momentum = ZERO;
    for j in 0..n {
        if amps[j] == ZERO {
            continue;
        }
        let aj = shifts[j].conj();
        for k in 0..n {
            if amps[k] == ZERO {
                continue;
            }
            let weight = amps[j].conj() * amps[k];
            let diff = aj - shifts[k];
            let overlap = (-(diff * diff) / var8).exp();
            let w = weight * overlap;
            norm += w;
            position += w * (aj + shifts[k]) * 0.5;
            // <phi_j| -i d/dx |phi_k> = i (conj(a_j) - a_k) / (4 sigma^2) * overlap
            momentum += w * Complex64::new(0.0, 1.0) * diff * (2.0 / var8);
        }
    }
    let probability = norm.re;
    if probability.is_nan() || probability <= 1e-300 {
        return Err(PpsError::PostSelectionOrthogonal {
            overlap: inner(&post, &pre)?,
        });
    }
    Ok(PointerOutcome {
        mean_position_shift: (position / norm).re,
        mean_momentum_shift: (momentum / norm).re,
        postselection_probability: probability,
    })
}

/// Single pointer coupled to `g1 * o1 + g2 * o2` (unit overall coupling).
pub fn simulate_joint(
    post: &CVector,
    pre: &CVector,
    o1: &CMatrix,
    o2: &CMatrix,
    g1: f64,
    g2: f64,
    sigma: f64,
) -> Result<PointerOutcome> {
    if o1.shape() != o2.shape() {
        return Err(PpsError::DimensionMismatch {
            expected: o1.nrows(),
            found: o2.nrows(),
        });
    }
    let combined = o1 * Complex64::new(g1, 0.0) + o2 * Complex64::new(g2, 0.0);
    simulate(post, pre, &combined, &PointerConfig::new(sigma, 1.0)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub g: f64,
    pub outcome: PointerOutcome,
    pub shift_over_g: f64,
    /// `|shift / g - Re(w)|`.
    pub error: f64,
    /// Error relative to the previous row's error.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub weak_value: Complex64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn errors_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error <= w[0].error)
    }
}

/// Runs [`simulate`] down a ladder of couplings and compares `shift / g`
/// with the real part of the weak value.
pub fn weak_limit_check(
    post: &CVector,
    pre: &CVector,
    op: &CMatrix,
    sigma: f64,
    ladder: &[f64],
) -> Result<ConvergenceTable> {
    if ladder.is_empty() || ladder.iter().any(|g| g.is_nan() || *g <= 0.0) || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(PpsError::InvalidConfig(
            "ladder must be positive and strictly decreasing".into(),
        ));
    }
    let w = weak_value(post, pre, op, DEFAULT_OVERLAP_TOL)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ladder.len());
    for &g in ladder {
        let outcome = simulate(post, pre, op, &PointerConfig::new(sigma, g)?)?;
        let shift_over_g = outcome.mean_position_shift / g;
        let error = (shift_over_g - w.re).abs();
        let ratio = rows
            .last()
            .map(|prev| if prev.error > 0.0 { error / prev.error } else { 0.0 });
        rows.push(ConvergenceRow {
            g,
            outcome,
            shift_over_g,
            error,
            ratio,
        });
    }
    Ok(ConvergenceTable { weak_value: w, rows })
}

/// Geometric ladder `g, g/2, g/4, ...` with `steps` entries.
pub fn halving_ladder(g: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|i| g / f64::powi(2.0, i as i32)).collect()
}
