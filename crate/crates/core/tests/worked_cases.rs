use pps_core::hilbert::{c, rdiag, rvec, svd_singular_values, ZERO};
use pps_core::scenarios::{builtin, entangled_pair, example_one, example_two, verify_expectations, BUILTIN_NAMES};
use pps_core::weakvalue::{verify_states, DEFAULT_OVERLAP_TOL, DEFAULT_PATTERN_TOL};
use pps_core::{
    solve_problem, verify_disembodiment, weak_value, BlockStatus, CMatrix, CoefficientMatrix, SearchConfig,
};

#[test]
fn every_builtin_expectation_holds() {
    let cfg = SearchConfig::default();
    for name in BUILTIN_NAMES {
        let scenario = builtin(name).unwrap();
        assert!(!scenario.expected.is_empty());
        for r in verify_expectations(&scenario, &cfg).unwrap() {
            assert!(
                r.passed,
                "{name}: {} ({:?}) -> {}",
                r.expectation.note, r.expectation.check, r.detail
            );
        }
    }
}

#[test]
fn cheshire_solves_and_round_trips() {
    let s = example_one();
    let sol = solve_problem(&s.problem, &SearchConfig::default()).unwrap();
    assert!(sol.all_solved());
    let sel = sol.selection().expect("assembled");
    let report = verify_disembodiment(sel, &s.problem, DEFAULT_PATTERN_TOL).unwrap();
    assert!(report.pattern_ok, "{report:?}");
    // Per-block bilinear values equal the target times the block scale.
    for (b, scale) in sel.block_scales.iter().enumerate() {
        for j in 0..s.problem.observable_count() {
            let want = s.problem.target.row(b)[j] * scale;
            assert!((report.bilinear[(j, b)] - want).norm() <= 1e-7);
        }
    }
}

/// Direct evaluation of all sixteen bilinear values on the reference
/// four-path states, independent of the solver.
#[test]
fn four_pauli_reference_states_brute_force() {
    let s = example_two();
    let sel = s.reference_selection.as_ref().unwrap();
    let x = sel.post.to_flat();
    let y = sel.pre.to_flat();
    let mut values = [[ZERO; 4]; 4];
    for (path, row) in values.iter_mut().enumerate() {
        let (x1, x2) = (x[2 * path], x[2 * path + 1]);
        let (y1, y2) = (y[2 * path], y[2 * path + 1]);
        *row = [
            x1 * y1 + x2 * y2,
            x1 * y2 + x2 * y1,
            c(0.0, -1.0) * x1 * y2 + c(0.0, 1.0) * x2 * y1,
            x1 * y1 - x2 * y2,
        ];
    }
    let overlap: pps_core::Complex = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    assert_eq!(overlap, c(4.0, 0.0));
    // sigma-x in path 1 is 2 (weak value 1/2) although it should vanish.
    assert_eq!(values[0][1], c(2.0, 0.0));
    let off_pattern_nonzero = (0..4)
        .flat_map(|p| (0..4).map(move |j| (p, j)))
        .filter(|&(p, j)| p != j && values[p][j] != ZERO)
        .count();
    assert!(off_pattern_nonzero > 0);

    let report = verify_disembodiment(sel, &s.problem, DEFAULT_PATTERN_TOL).unwrap();
    assert!(!report.pattern_ok);
    for (p, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((report.bilinear[(j, p)] - v).norm() < 1e-12);
        }
    }
    assert!((report.weak_values[(1, 0)] - c(0.5, 0.0)).norm() < 1e-9);
}

#[test]
fn four_pauli_unique_solutions_have_rank_two() {
    let s = example_two();
    let sol = solve_problem(&s.problem, &SearchConfig::default()).unwrap();
    for (b, verdict) in sol.verdicts.iter().enumerate() {
        assert!(verdict.feasible);
        let set = verdict.solution.as_ref().unwrap();
        assert!(set.nullspace.is_empty());
        let v = pps_core::factorize::reshape(&set.particular).unwrap();
        let sv = svd_singular_values(&v);
        assert!((sv[0] - 0.5).abs() < 1e-12 && (sv[1] - 0.5).abs() < 1e-12);
        match sol.diagnosis[b] {
            BlockStatus::Rank1NotFound { best_residual, exact } => {
                assert!(exact);
                assert!(best_residual >= 0.99);
            }
            other => panic!("block {b}: {other}"),
        }
    }
    assert!(sol.selection().is_none());
}

#[test]
fn four_pauli_determinant() {
    let m = CoefficientMatrix::build(&example_two().problem.observables).unwrap();
    let det = m.matrix().clone().determinant();
    assert!((det - c(0.0, -4.0)).norm() < 1e-10);
    assert!(svd_singular_values(m.matrix()).iter().all(|&s| s > 0.1));
}

#[test]
fn entangled_minus_solution_signs() {
    let s = entangled_pair();
    let sol = solve_problem(&s.problem, &SearchConfig::default()).unwrap();
    assert!(sol.all_solved(), "{:?}", sol.diagnosis);
    let sel = sol.selection().unwrap();
    let post = sel.post.to_flat();
    let pre = sel.pre.to_flat();
    let w1 = weak_value(&post, &pre, &s.problem.observables[4].matrix, DEFAULT_OVERLAP_TOL).unwrap();
    let w2 = weak_value(&post, &pre, &s.problem.observables[7].matrix, DEFAULT_OVERLAP_TOL).unwrap();
    assert!(w1.re > 0.0 && w2.re < 0.0, "{w1} {w2}");
    // I1A + I2A is the identity, so the overlap equals the I1A + I2A target.
    assert!((w1 - c(1.0, 0.0)).norm() < 1e-7 && (w2 + c(1.0, 0.0)).norm() < 1e-7);
    let report = verify_disembodiment(sel, &s.problem, DEFAULT_PATTERN_TOL).unwrap();
    assert!(report.pattern_ok);
    assert!(report.proportionality_error < 1e-7);
}

#[test]
fn entangled_plus_is_linearly_infeasible() {
    let s = builtin("entangled-plus").unwrap();
    let sol = solve_problem(&s.problem, &SearchConfig::default()).unwrap();
    assert_eq!(sol.diagnosis, vec![BlockStatus::LinearInfeasible]);
    assert_eq!((sol.verdicts[0].rank_m, sol.verdicts[0].rank_augmented), (6, 7));
}

#[test]
fn cheshire_reference_weak_values_flat() {
    let s = example_one();
    let post = rvec(&[0.5, 0.5, 0.5, 0.5]);
    let pre = rvec(&[0.5, 0.5, 0.5, -0.5]);
    let r = verify_states(&post, &pre, &s.problem, DEFAULT_PATTERN_TOL, DEFAULT_OVERLAP_TOL).unwrap();
    assert!(r.pattern_ok);
    assert_eq!(r.amplitudes, vec![Some(c(1.0, 0.0)), Some(c(1.0, 0.0))]);
    let id = CMatrix::identity(4, 4);
    assert_eq!(weak_value(&post, &pre, &id, DEFAULT_OVERLAP_TOL).unwrap(), c(1.0, 0.0));
    let n2 = rdiag(&[0.0, 0.0, 1.0, 1.0]);
    assert!(weak_value(&post, &pre, &n2, DEFAULT_OVERLAP_TOL).unwrap().norm() < 1e-15);
}

#[test]
fn solving_is_deterministic() {
    let s = entangled_pair();
    let cfg = SearchConfig::with_seed(42);
    let a = solve_problem(&s.problem, &cfg).unwrap();
    let b = solve_problem(&s.problem, &cfg).unwrap();
    assert_eq!(a, b);
}

/// With `x` all ones the diagonal observables reduce to `M_diag y = e`; the
/// minimum-norm `y` below was computed independently.
#[test]
fn entangled_minus_factors_with_unit_post_selection() {
    let s = entangled_pair();
    let post = rvec(&[1.0; 8]);
    let pre = rvec(&[0.25, 0.75, 0.0, 0.0, -0.25, 0.25, 0.0, 0.0]);
    let want = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, -1.0];
    for (o, w) in s.problem.observables.iter().zip(want) {
        assert!(
            (post.dot(&(&o.matrix * &pre)) - c(w, 0.0)).norm() < 1e-12,
            "{}",
            o.label
        );
    }
    let r = verify_states(&post, &pre, &s.problem, DEFAULT_PATTERN_TOL, DEFAULT_OVERLAP_TOL).unwrap();
    assert!(r.pattern_ok);
}
