//! Built-in worked cases and random generators for property tests.
//!
//! Each built-in carries a list of [`Expectation`]s tagged with the kind of
//! evidence behind them; [`verify_expectations`] checks all of them
//! end-to-end through the solver.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::criterion::{feasibility, CoefficientMatrix};
use crate::error::Result;
use crate::factorize::{solve_problem, BlockStatus, SearchConfig, SelectionPair, Solution};
use crate::hilbert::{c, cmat, cvec, rank, rdiag, rvec, BlockSpace, CMatrix, CVector, I, ONE, ZERO};
use crate::problem::{unit_delta_target, Observable, SeparationProblem, TargetPattern};
use crate::weakvalue::{verify_disembodiment, DEFAULT_PATTERN_TOL};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["cheshire", "four-pauli", "entangled-minus", "entangled-plus"];

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evidence {
    /// Quoted with the original description of the case.
    Reported,
    /// Obtained by an independent computation (hand solve, direct evaluation).
    Computed,
    /// Follows immediately from the definitions.
    Elementary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    /// Rank of the coefficient matrix.
    Rank(usize),
    /// Determinant of a square coefficient matrix.
    Determinant {
        value: Complex64,
        tol: f64,
    },
    /// Coefficient matrix with all-zero columns dropped.
    CompressedMatrix(CMatrix),
    /// `sum_j coefficients[j] * row_j(M) == 0` exactly.
    RowDependency(Vec<f64>),
    LinearFeasible {
        block: usize,
        feasible: bool,
    },
    /// Minimum-norm particular solution of one block.
    LinearSolution {
        block: usize,
        solution: CVector,
        tol: f64,
    },
    Status {
        block: usize,
        status: &'static str,
    },
    /// Every block reported as not factorable with at least this residual.
    MinRank1Residual {
        block: usize,
        at_least: f64,
    },
    ReferencePattern {
        ok: bool,
    },
    ReferenceWeakValue {
        observable: usize,
        block: usize,
        value: Complex64,
        tol: f64,
    },
    /// Two weak values of the solved selection have opposite real signs.
    SolvedOppositeSigns {
        first: (usize, usize),
        second: (usize, usize),
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub check: Check,
    pub evidence: Evidence,
    pub note: &'static str,
}

impl Expectation {
    fn new(check: Check, evidence: Evidence, note: &'static str) -> Self {
        Self { check, evidence, note }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetVariant {
    pub name: &'static str,
    pub target: TargetPattern,
    pub expectations: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedScenario {
    pub problem: SeparationProblem,
    pub reference_selection: Option<SelectionPair>,
    pub expected: Vec<Expectation>,
    /// Alternative targets on the same space and observables.
    pub variants: Vec<TargetVariant>,
    /// Optional labels for the total-space basis.
    pub basis_labels: Option<Vec<String>>,
}

impl NamedScenario {
    /// The scenario with a variant's target and expectations swapped in.
    pub fn variant(&self, name: &str) -> Option<NamedScenario> {
        let v = self.variants.iter().find(|v| v.name == name)?;
        let mut problem = self.problem.clone();
        problem.name = v.name.to_string();
        problem.target = v.target.clone();
        Some(NamedScenario {
            problem,
            reference_selection: None,
            expected: v.expectations.clone(),
            variants: Vec::new(),
            basis_labels: self.basis_labels.clone(),
        })
    }
}

fn pauli_x() -> CMatrix {
    cmat(2, 2, &[ZERO, ONE, ONE, ZERO])
}

fn pauli_y() -> CMatrix {
    cmat(2, 2, &[ZERO, -I, I, ZERO])
}

fn pauli_z() -> CMatrix {
    rdiag(&[1.0, -1.0])
}

/// Photon number and polarization separated into two paths.
pub fn example_one() -> NamedScenario {
    let space = BlockSpace::uniform("path", 2, 2).expect("static layout");
    let problem = SeparationProblem::new(
        "cheshire",
        space.clone(),
        vec![
            Observable::new("photon-number", CMatrix::identity(2, 2)),
            Observable::new("sigma-z", pauli_z()),
        ],
        unit_delta_target(2),
    );
    let reference = SelectionPair::from_flat(&space, &rvec(&[0.5, 0.5, 0.5, 0.5]), &rvec(&[0.5, 0.5, 0.5, -0.5]))
        .expect("static states");
    use Check::*;
    use Evidence::*;
    let expected = vec![
        Expectation::new(Rank(2), Reported, "rank of M is 2"),
        Expectation::new(
            CompressedMatrix(cmat(2, 2, &[ONE, ONE, ONE, -ONE])),
            Reported,
            "compressed M = ((1, 1), (1, -1))",
        ),
        Expectation::new(
            LinearSolution {
                block: 0,
                solution: rvec(&[0.5, 0.0, 0.0, 0.5]),
                tol: 1e-10,
            },
            Computed,
            "path 1 products x1y1 = x2y2 = 1/2",
        ),
        Expectation::new(
            LinearSolution {
                block: 1,
                solution: rvec(&[0.5, 0.0, 0.0, -0.5]),
                tol: 1e-10,
            },
            Computed,
            "path 2 products x1y1 = -x2y2 = 1/2",
        ),
        Expectation::new(
            Status {
                block: 0,
                status: "SOLVED",
            },
            Reported,
            "path 1 separable",
        ),
        Expectation::new(
            Status {
                block: 1,
                status: "SOLVED",
            },
            Reported,
            "path 2 separable",
        ),
        Expectation::new(
            ReferencePattern { ok: true },
            Computed,
            "reference states realize the pattern",
        ),
        Expectation::new(
            ReferenceWeakValue {
                observable: 0,
                block: 0,
                value: ONE,
                tol: 1e-9,
            },
            Computed,
            "photon number in path 1",
        ),
        Expectation::new(
            ReferenceWeakValue {
                observable: 1,
                block: 0,
                value: ZERO,
                tol: 1e-9,
            },
            Computed,
            "polarization in path 1",
        ),
        Expectation::new(
            ReferenceWeakValue {
                observable: 0,
                block: 1,
                value: ZERO,
                tol: 1e-9,
            },
            Computed,
            "photon number in path 2",
        ),
        Expectation::new(
            ReferenceWeakValue {
                observable: 1,
                block: 1,
                value: ONE,
                tol: 1e-9,
            },
            Computed,
            "polarization in path 2",
        ),
    ];
    NamedScenario {
        problem,
        reference_selection: Some(reference),
        expected,
        variants: Vec::new(),
        basis_labels: None,
    }
}

/// Identity and the three Pauli operators separated into four paths.
///
/// The linear systems are uniquely solvable, but none of the unique
/// solutions has rank one, and the reference states do not realize the
/// pattern. Both facts are recorded as expectations.
pub fn example_two() -> NamedScenario {
    let space = BlockSpace::uniform("path", 4, 2).expect("static layout");
    let problem = SeparationProblem::new(
        "four-pauli",
        space.clone(),
        vec![
            Observable::new("I", CMatrix::identity(2, 2)),
            Observable::new("sigma-x", pauli_x()),
            Observable::new("sigma-y", pauli_y()),
            Observable::new("sigma-z", pauli_z()),
        ],
        unit_delta_target(4),
    );
    let post = CVector::repeat(8, ONE);
    let pre = cvec(&[ONE, ONE, ONE, ONE, I, -I, ONE, -ONE]);
    let reference = SelectionPair::from_flat(&space, &post, &pre).expect("static states");
    let half = c(0.5, 0.0);
    let ihalf = c(0.0, 0.5);
    let solutions = [
        cvec(&[half, ZERO, ZERO, half]),
        cvec(&[ZERO, half, half, ZERO]),
        cvec(&[ZERO, ihalf, -ihalf, ZERO]),
        cvec(&[half, ZERO, ZERO, -half]),
    ];
    use Check::*;
    use Evidence::*;
    let mut expected = vec![
        Expectation::new(
            Determinant {
                value: c(0.0, -4.0),
                tol: 1e-10,
            },
            Reported,
            "det M = -4i",
        ),
        Expectation::new(Rank(4), Reported, "rank of M is 4"),
    ];
    for (block, solution) in solutions.into_iter().enumerate() {
        expected.push(Expectation::new(
            LinearSolution {
                block,
                solution,
                tol: 1e-10,
            },
            Reported,
            "unique products per path",
        ));
    }
    for block in 0..4 {
        expected.push(Expectation::new(
            Status {
                block,
                status: "RANK1_NOT_FOUND",
            },
            Computed,
            "unique solution has rank 2",
        ));
        expected.push(Expectation::new(
            MinRank1Residual { block, at_least: 0.99 },
            Computed,
            "sigma_2 / sigma_1 of the unique solution is 1",
        ));
    }
    expected.push(Expectation::new(
        ReferencePattern { ok: false },
        Computed,
        "reference states leave sigma-x nonzero in path 1",
    ));
    expected.push(Expectation::new(
        ReferenceWeakValue {
            observable: 1,
            block: 0,
            value: half,
            tol: 1e-9,
        },
        Computed,
        "sigma-x weak value in path 1 is 1/2",
    ));
    NamedScenario {
        problem,
        reference_selection: Some(reference),
        expected,
        variants: Vec::new(),
        basis_labels: None,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pol {
    H,
    V,
}

/// Two photons with entangled polarization, photon A in paths 1/2 and
/// photon B in paths 3/4, modeled as one 8-dimensional block.
///
/// The default target is the feasible one; the infeasible target is
/// available as the `entangled-plus` variant.
pub fn entangled_pair() -> NamedScenario {
    // Basis order |1H3V>, |1H4V>, |1V3H>, |1V4H>, |2H3V>, |2H4V>, |2V3H>, |2V4H>.
    let mut basis = Vec::with_capacity(8);
    for path_a in [1, 2] {
        for pol_a in [Pol::H, Pol::V] {
            for path_b in [3, 4] {
                let pol_b = if pol_a == Pol::H { Pol::V } else { Pol::H };
                basis.push((path_a, pol_a, path_b, pol_b));
            }
        }
    }
    let sign = |p: Pol| if p == Pol::H { 1.0 } else { -1.0 };
    let number_a = |path| {
        rdiag(
            &basis
                .iter()
                .map(|b| if b.0 == path { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        )
    };
    let number_b = |path| {
        rdiag(
            &basis
                .iter()
                .map(|b| if b.2 == path { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        )
    };
    let pol_a = |path| {
        rdiag(
            &basis
                .iter()
                .map(|b| if b.0 == path { sign(b.1) } else { 0.0 })
                .collect::<Vec<_>>(),
        )
    };
    let pol_b = |path| {
        rdiag(
            &basis
                .iter()
                .map(|b| if b.2 == path { sign(b.3) } else { 0.0 })
                .collect::<Vec<_>>(),
        )
    };
    let observables = vec![
        Observable::new("I1A", number_a(1)),
        Observable::new("I2A", number_a(2)),
        Observable::new("I3B", number_b(3)),
        Observable::new("I4B", number_b(4)),
        Observable::new("sigma1A", pol_a(1)),
        Observable::new("sigma2A", pol_a(2)),
        Observable::new("sigma3B", pol_b(3)),
        Observable::new("sigma4B", pol_b(4)),
    ];
    let labels = basis
        .iter()
        .map(|&(pa, a, pb, b)| {
            let p = |x: Pol| if x == Pol::H { 'H' } else { 'V' };
            format!("{pa}{}{pb}{}", p(a), p(b))
        })
        .collect();

    let minus = TargetPattern::new(vec![[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, -1.0]
        .map(|r| c(r, 0.0))
        .to_vec()]);
    let plus = TargetPattern::new(vec![[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]
        .map(|r| c(r, 0.0))
        .to_vec()]);

    #[rustfmt::skip]
    let expected_m: [f64; 64] = [
         1.0,  1.0,  1.0,  1.0,  0.0,  0.0,  0.0,  0.0,
         0.0,  0.0,  0.0,  0.0,  1.0,  1.0,  1.0,  1.0,
         1.0,  0.0,  1.0,  0.0,  1.0,  0.0,  1.0,  0.0,
         0.0,  1.0,  0.0,  1.0,  0.0,  1.0,  0.0,  1.0,
         1.0,  1.0, -1.0, -1.0,  0.0,  0.0,  0.0,  0.0,
         0.0,  0.0,  0.0,  0.0,  1.0,  1.0, -1.0, -1.0,
        -1.0,  0.0,  1.0,  0.0, -1.0,  0.0,  1.0,  0.0,
         0.0, -1.0,  0.0,  1.0,  0.0, -1.0,  0.0,  1.0,
    ];
    let expected_m = CMatrix::from_row_iterator(8, 8, expected_m.iter().map(|&r| c(r, 0.0)));

    use Check::*;
    use Evidence::*;
    let shared = vec![
        Expectation::new(
            CompressedMatrix(expected_m),
            Reported,
            "compressed 8x8 coefficient matrix",
        ),
        Expectation::new(
            RowDependency(vec![1.0, 1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0]),
            Elementary,
            "r1 + r2 - r3 - r4 = 0",
        ),
        Expectation::new(
            RowDependency(vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]),
            Elementary,
            "r5 + r6 + r7 + r8 = 0",
        ),
        Expectation::new(Rank(6), Computed, "two independent row dependencies"),
    ];
    let mut minus_expect = shared.clone();
    minus_expect.extend([
        Expectation::new(
            LinearFeasible {
                block: 0,
                feasible: true,
            },
            Reported,
            "anti-correlated target is reachable",
        ),
        Expectation::new(
            Status {
                block: 0,
                status: "SOLVED",
            },
            Computed,
            "a product factorization exists",
        ),
        Expectation::new(
            SolvedOppositeSigns {
                first: (4, 0),
                second: (7, 0),
            },
            Reported,
            "targeted polarization values come out as 1 and -1",
        ),
    ]);
    let mut plus_expect = shared;
    plus_expect.extend([
        Expectation::new(
            LinearFeasible {
                block: 0,
                feasible: false,
            },
            Reported,
            "correlated target is unreachable",
        ),
        Expectation::new(
            Status {
                block: 0,
                status: "LINEAR_INFEASIBLE",
            },
            Reported,
            "no solution exists",
        ),
    ]);

    let space = BlockSpace::new([("configurations", 8)]).expect("static layout");
    NamedScenario {
        problem: SeparationProblem::new("entangled-minus", space, observables, minus.clone()),
        reference_selection: None,
        expected: minus_expect.clone(),
        variants: vec![
            TargetVariant {
                name: "entangled-minus",
                target: minus,
                expectations: minus_expect,
            },
            TargetVariant {
                name: "entangled-plus",
                target: plus,
                expectations: plus_expect,
            },
        ],
        basis_labels: Some(labels),
    }
}

/// Built-in scenario by name (see [`BUILTIN_NAMES`]).
pub fn builtin(name: &str) -> Option<NamedScenario> {
    match name {
        "cheshire" => Some(example_one()),
        "four-pauli" => Some(example_two()),
        "entangled-minus" | "entangled-plus" => entangled_pair().variant(name),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomShape {
    pub blocks: usize,
    pub dim: usize,
    pub observables: usize,
}

impl RandomShape {
    /// Uniform draw with `blocks <= 4`, `dim <= 3`, `observables <= 4`.
    pub fn draw(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5A4E);
        Self {
            blocks: rng.random_range(1..=4),
            dim: rng.random_range(1..=3),
            observables: rng.random_range(1..=4),
        }
    }
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng))
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Random problem with shared Hermitian observables.
///
/// When `planted`, each block's target row is evaluated on a random product
/// `(x_b, y_b)`, so a product-form solution exists and is kept as the
/// reference selection. Otherwise targets are random.
pub fn random_scenario(seed: u64, shape: RandomShape, planted: bool) -> NamedScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let RandomShape {
        blocks,
        dim,
        observables,
    } = shape;
    let space = BlockSpace::uniform("block", blocks, dim).expect("positive sizes");
    let observables: Vec<Observable> = (0..observables)
        .map(|j| Observable::new(format!("O{}", j + 1), random_hermitian(&mut rng, dim)))
        .collect();
    let mut post = Vec::new();
    let mut pre = Vec::new();
    let rows = (0..blocks)
        .map(|_| {
            if planted {
                let x = random_vector(&mut rng, dim);
                let y = random_vector(&mut rng, dim);
                let row = observables.iter().map(|o| x.dot(&(&o.matrix * &y))).collect();
                post.extend(x.iter().copied());
                pre.extend(y.iter().copied());
                row
            } else {
                (0..observables.len()).map(|_| complex_normal(&mut rng)).collect()
            }
        })
        .collect();
    let problem = SeparationProblem::new(
        format!("random-{seed}"),
        space.clone(),
        observables,
        TargetPattern::new(rows),
    );
    let reference_selection = planted
        .then(|| SelectionPair::from_flat(&space, &cvec(&post), &cvec(&pre)).ok())
        .flatten();
    NamedScenario {
        problem,
        reference_selection,
        expected: Vec::new(),
        variants: Vec::new(),
        basis_labels: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationResult {
    pub expectation: Expectation,
    pub passed: bool,
    pub detail: String,
}

/// Checks every expectation of `scenario` against the solver.
pub fn verify_expectations(scenario: &NamedScenario, config: &SearchConfig) -> Result<Vec<ExpectationResult>> {
    let problem = &scenario.problem;
    let m = CoefficientMatrix::build(&problem.observables)?;
    let solution: Solution = solve_problem(problem, config)?;
    let reference = scenario
        .reference_selection
        .as_ref()
        .map(|sel| verify_disembodiment(sel, problem, DEFAULT_PATTERN_TOL))
        .transpose()?;

    let mut out = Vec::with_capacity(scenario.expected.len());
    for exp in &scenario.expected {
        let (passed, detail) = match &exp.check {
            Check::Rank(want) => {
                let got = rank(m.matrix(), config.linear_tol);
                (got == *want, format!("rank {got}"))
            }
            Check::Determinant { value, tol } => {
                let a = m.matrix();
                if a.is_square() {
                    let det = a.clone().determinant();
                    ((det - value).norm() <= *tol, format!("det {det}"))
                } else {
                    (false, "matrix is not square".into())
                }
            }
            Check::CompressedMatrix(want) => {
                let got = m.compressed().0;
                (&got == want, format!("{}x{} compressed", got.nrows(), got.ncols()))
            }
            Check::RowDependency(coeffs) => {
                let a = m.matrix();
                let mut sum = CVector::zeros(a.ncols());
                for (j, w) in coeffs.iter().enumerate() {
                    sum += a.row(j).transpose() * c(*w, 0.0);
                }
                (sum.iter().all(|z| *z == ZERO), format!("|sum| = {:.3e}", sum.norm()))
            }
            Check::LinearFeasible { block, feasible } => {
                let v = feasibility(&m, &problem.target.row_vector(*block), config.linear_tol)?;
                (
                    v.feasible == *feasible,
                    format!("rank {}/{} feasible={}", v.rank_m, v.rank_augmented, v.feasible),
                )
            }
            Check::LinearSolution {
                block,
                solution: want,
                tol,
            } => match &solution.verdicts[*block].solution {
                Some(set) => {
                    let err = (&set.particular - want).norm();
                    (err <= *tol, format!("error {err:.3e}"))
                }
                None => (false, "block infeasible".into()),
            },
            Check::Status { block, status } => {
                let got = solution.diagnosis[*block].code();
                (got == *status, got.to_string())
            }
            Check::MinRank1Residual { block, at_least } => match solution.diagnosis[*block] {
                BlockStatus::Rank1NotFound { best_residual, .. } => {
                    (best_residual >= *at_least, format!("residual {best_residual:.6}"))
                }
                other => (false, other.code().to_string()),
            },
            Check::ReferencePattern { ok } => match &reference {
                Some(r) => (r.pattern_ok == *ok, format!("pattern_ok={}", r.pattern_ok)),
                None => (false, "no reference selection".into()),
            },
            Check::ReferenceWeakValue {
                observable,
                block,
                value,
                tol,
            } => match &reference {
                Some(r) => {
                    let got = r.weak_values[(*observable, *block)];
                    ((got - value).norm() <= *tol, format!("weak value {got}"))
                }
                None => (false, "no reference selection".into()),
            },
            Check::SolvedOppositeSigns { first, second } => match solution.selection() {
                Some(sel) => {
                    let r = verify_disembodiment(sel, problem, DEFAULT_PATTERN_TOL)?;
                    let a = r.weak_values[*first];
                    let b = r.weak_values[*second];
                    (a.re * b.re < 0.0, format!("{a} vs {b}"))
                }
                None => (false, "no solved selection".into()),
            },
        };
        out.push(ExpectationResult {
            expectation: exp.clone(),
            passed,
            detail,
        });
    }
    Ok(out)
}
