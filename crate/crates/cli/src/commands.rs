use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use pps_core::pointer::halving_ladder;
use pps_core::scenarios::{builtin, BUILTIN_NAMES};
use pps_core::weakvalue::{verify_states, WeakValueReport, DEFAULT_OVERLAP_TOL, DEFAULT_PATTERN_TOL};
use pps_core::{
    simulate as simulate_pointer, simulate_joint, solve_all_blocks, solve_problem, weak_limit_check, weak_value,
    BlockStatus, CVector, PointerConfig, Rank1Outcome, SearchConfig, SelectionOutcome, SelectionPair,
    SeparationProblem, Solution,
};
use serde::Serialize;

use crate::file::{Pair, ScenarioFile};
use crate::format::{complex, complex_scaled, num, scale, vector};
use crate::{CliError, Exit};

fn load(path: &Path) -> Result<crate::Loaded, CliError> {
    ScenarioFile::read(path)?.load()
}

fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

fn pairs(v: &CVector) -> Vec<Pair> {
    v.iter().map(|z| pair(*z)).collect()
}

/// Left-aligned columns separated by two spaces.
fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str("  ");
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn check(path: &Path, tol: f64, out: &mut dyn Write) -> Result<Exit, CliError> {
    let loaded = load(path)?;
    let verdicts = solve_all_blocks(&loaded.problem, tol)?;
    let parts: Vec<String> = verdicts
        .iter()
        .map(|v| {
            format!(
                "block {}: rank {}/{} {}",
                v.block + 1,
                v.rank_m,
                v.rank_augmented,
                if v.feasible { "FEASIBLE" } else { "INFEASIBLE" }
            )
        })
        .collect();
    writeln!(out, "{}", parts.join("; "))?;
    Ok(if verdicts.iter().all(|v| v.feasible) {
        Exit::Success
    } else {
        Exit::LinearInfeasible
    })
}

#[derive(Serialize)]
struct BlockReport {
    block: usize,
    label: String,
    rank: usize,
    augmented_rank: usize,
    feasible: bool,
    null_dim: Option<usize>,
    status: &'static str,
    residual: Option<f64>,
    exact: Option<bool>,
}

#[derive(Serialize)]
struct SelectionReport {
    pre: Vec<Pair>,
    post: Vec<Pair>,
    overlap: Pair,
    block_scales: Vec<Pair>,
}

#[derive(Serialize)]
struct EntryReport {
    operator: String,
    block: usize,
    value: Pair,
}

#[derive(Serialize)]
struct VerificationReport {
    pattern_ok: bool,
    tol: f64,
    overlap: Pair,
    operators: Vec<String>,
    blocks: Vec<String>,
    /// Operator-major: `weak_values[j][i]` is operator `j` on block `i`.
    weak_values: Vec<Vec<Pair>>,
    bilinear: Vec<Vec<Pair>>,
    violations: Vec<EntryReport>,
    complex_warnings: Vec<EntryReport>,
    proportionality_error: f64,
}

#[derive(Serialize)]
struct SolveReport {
    scenario: String,
    seed: u64,
    starts: usize,
    tol: f64,
    blocks: Vec<BlockReport>,
    orthogonal: bool,
    selection: Option<SelectionReport>,
    verification: Option<VerificationReport>,
    exit_code: i32,
}

fn block_reports(problem: &SeparationProblem, solution: &Solution) -> Vec<BlockReport> {
    solution
        .verdicts
        .iter()
        .zip(&solution.outcomes)
        .zip(&solution.diagnosis)
        .map(|((v, outcome), status)| {
            let (residual, exact) = match (outcome, status) {
                (Some(Rank1Outcome::Found(f)), _) => (Some(f.residual), None),
                (_, BlockStatus::Rank1NotFound { best_residual, exact }) => (Some(*best_residual), Some(*exact)),
                _ => (None, None),
            };
            BlockReport {
                block: v.block + 1,
                label: problem.space.blocks()[v.block].label.clone(),
                rank: v.rank_m,
                augmented_rank: v.rank_augmented,
                feasible: v.feasible,
                null_dim: v.solution.as_ref().map(|s| s.null_dim()),
                status: status.code(),
                residual,
                exact,
            }
        })
        .collect()
}

fn verification_report(problem: &SeparationProblem, r: &WeakValueReport) -> VerificationReport {
    let labels: Vec<String> = problem.observables.iter().map(|o| o.label.clone()).collect();
    let grid = |m: &pps_core::CMatrix| -> Vec<Vec<Pair>> {
        (0..m.nrows())
            .map(|j| (0..m.ncols()).map(|i| pair(m[(j, i)])).collect())
            .collect()
    };
    let entries = |list: &[pps_core::weakvalue::PatternEntry]| -> Vec<EntryReport> {
        list.iter()
            .map(|e| EntryReport {
                operator: labels[e.observable].clone(),
                block: e.block + 1,
                value: pair(e.value),
            })
            .collect()
    };
    VerificationReport {
        pattern_ok: r.pattern_ok,
        tol: r.tol,
        overlap: pair(r.overlap),
        operators: labels.clone(),
        blocks: problem.space.blocks().iter().map(|b| b.label.clone()).collect(),
        weak_values: grid(&r.weak_values),
        bilinear: grid(&r.bilinear),
        violations: entries(&r.violations),
        complex_warnings: entries(&r.complex_warnings),
        proportionality_error: r.proportionality_error,
    }
}

fn write_report(problem: &SeparationProblem, r: &WeakValueReport, out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(
        out,
        "overlap <Phi|Psi>: {}",
        complex_scaled(r.overlap, r.overlap.norm())
    )?;
    writeln!(out, "weak values:")?;
    let s = scale(r.weak_values.iter());
    let mut rows = vec![std::iter::once("operator".to_string())
        .chain(problem.space.blocks().iter().map(|b| b.label.clone()))
        .collect::<Vec<_>>()];
    for (j, o) in problem.observables.iter().enumerate() {
        rows.push(
            std::iter::once(o.label.clone())
                .chain((0..problem.block_count()).map(|i| complex_scaled(r.weak_values[(j, i)], s)))
                .collect(),
        );
    }
    write!(out, "{}", table(&rows))?;
    for e in &r.violations {
        writeln!(
            out,
            "offending: {} on block {} = {}",
            problem.observables[e.observable].label,
            e.block + 1,
            complex(e.value)
        )?;
    }
    for e in &r.complex_warnings {
        writeln!(
            out,
            "warning: complex weak value {} on block {} = {}",
            problem.observables[e.observable].label,
            e.block + 1,
            complex(e.value)
        )?;
    }
    writeln!(out, "proportionality error: {}", num(r.proportionality_error))?;
    writeln!(out, "verdict: {}", if r.pattern_ok { "PASS" } else { "FAIL" })?;
    Ok(())
}

fn search_config(seed: u64, starts: Option<usize>, tol: f64) -> SearchConfig {
    let mut cfg = SearchConfig::with_seed(seed);
    if let Some(s) = starts {
        cfg.starts = s;
    }
    cfg.linear_tol = tol;
    cfg
}

pub fn solve(
    path: &Path,
    seed: u64,
    starts: Option<usize>,
    tol: f64,
    json: bool,
    out: &mut dyn Write,
) -> Result<Exit, CliError> {
    let problem = load(path)?.problem;
    let cfg = search_config(seed, starts, tol);
    let solution = solve_problem(&problem, &cfg)?;
    let blocks = block_reports(&problem, &solution);
    let verification = solution
        .selection()
        .map(|sel| {
            verify_states(
                &sel.post.to_flat(),
                &sel.pre.to_flat(),
                &problem,
                DEFAULT_PATTERN_TOL,
                0.0,
            )
        })
        .transpose()?;

    let exit = if solution.diagnosis.contains(&BlockStatus::LinearInfeasible) {
        Exit::LinearInfeasible
    } else if !solution.all_solved() {
        Exit::Rank1NotFound
    } else if solution.selection == SelectionOutcome::Orthogonal {
        Exit::Orthogonal
    } else if verification.as_ref().is_some_and(|r| r.pattern_ok) {
        Exit::Success
    } else {
        Exit::Rank1NotFound
    };

    if json {
        let report = SolveReport {
            scenario: problem.name.clone(),
            seed,
            starts: cfg.starts,
            tol,
            blocks,
            orthogonal: solution.selection == SelectionOutcome::Orthogonal,
            selection: solution.selection().map(|s| SelectionReport {
                pre: pairs(&s.pre.to_flat()),
                post: pairs(&s.post.to_flat()),
                overlap: pair(s.overlap),
                block_scales: s.block_scales.iter().map(|z| pair(*z)).collect(),
            }),
            verification: verification.as_ref().map(|r| verification_report(&problem, r)),
            exit_code: exit.code(),
        };
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
        writeln!(out, "{text}")?;
        return Ok(exit);
    }

    writeln!(out, "scenario: {}", problem.name)?;
    for b in &blocks {
        let detail = match (b.status, b.residual, b.exact) {
            ("LINEAR_INFEASIBLE", _, _) => format!("rank {}/{}", b.rank, b.augmented_rank),
            (_, Some(r), Some(true)) => format!("best residual {} (unique linear solution)", num(r)),
            (_, Some(r), Some(false)) => format!("best residual {}", num(r)),
            (_, Some(r), None) => format!("residual {}", num(r)),
            _ => String::new(),
        };
        writeln!(out, "block {} ({}): {} {detail}", b.block, b.label, b.status)?;
    }
    match &solution.selection {
        SelectionOutcome::Assembled(sel) => {
            writeln!(out, "pre |Psi>: {}", vector(sel.pre.to_flat().iter()))?;
            writeln!(out, "post <Phi|: {}", vector(sel.post.to_flat().iter()))?;
            if sel.block_scales.iter().any(|s| *s != Complex64::new(1.0, 0.0)) {
                writeln!(out, "block scales: {}", vector(sel.block_scales.iter()))?;
            }
            if let Some(r) = &verification {
                write_report(&problem, r, out)?;
            }
        }
        SelectionOutcome::Orthogonal => writeln!(out, "every block solved but all rescalings leave <Phi|Psi> ≈ 0")?,
        SelectionOutcome::Incomplete => {}
    }
    Ok(exit)
}

fn parse_csv(field: &str, text: &str) -> Result<CVector, CliError> {
    let entries = text
        .split(',')
        .map(|s| s.trim())
        .enumerate()
        .map(|(k, s)| {
            s.parse::<Complex64>()
                .map_err(|_| CliError::Input(format!("--{field}: entry {} ({s:?}) is not a complex number", k + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CVector::from_vec(entries))
}

pub fn weak_values(path: &Path, pre: &str, post: &str, tol: f64, out: &mut dyn Write) -> Result<Exit, CliError> {
    let problem = load(path)?.problem;
    let pre = parse_csv("pre", pre)?;
    let post = parse_csv("post", post)?;
    let total = problem.space.total_dim();
    for (field, v) in [("pre", &pre), ("post", &post)] {
        if v.len() != total {
            return Err(CliError::Input(format!(
                "--{field}: {} entries, expected {total}",
                v.len()
            )));
        }
    }
    let report = verify_states(&post, &pre, &problem, tol, DEFAULT_OVERLAP_TOL)?;
    write_report(&problem, &report, out)?;
    Ok(Exit::Success)
}

pub struct SimulateArgs {
    pub operators: Vec<String>,
    pub block: usize,
    pub g: Vec<f64>,
    pub sigma: f64,
    pub ladder: Option<usize>,
    pub seed: u64,
}

fn selection_for(loaded: &crate::Loaded, seed: u64) -> Result<(SelectionPair, &'static str), CliError> {
    if let Some(sel) = &loaded.reference {
        return Ok((sel.clone(), "reference"));
    }
    let solution = solve_problem(&loaded.problem, &SearchConfig::with_seed(seed))?;
    match solution.selection {
        SelectionOutcome::Assembled(sel) => Ok((sel, "solved")),
        _ => Err(CliError::MissingSelection(format!(
            "the file has no reference states and solving gave [{}]",
            solution
                .diagnosis
                .iter()
                .map(|d| d.code())
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

pub fn simulate(path: &Path, args: &SimulateArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    let loaded = load(path)?;
    let problem = &loaded.problem;
    if args.operators.len() != args.g.len() {
        return Err(CliError::Input(format!(
            "{} --operator values but {} --g values",
            args.operators.len(),
            args.g.len()
        )));
    }
    if args.operators.len() > 2 {
        return Err(CliError::Input("at most two --operator/--g pairs".into()));
    }
    if args.block == 0 || args.block > problem.block_count() {
        return Err(CliError::Input(format!(
            "--block {} out of range 1..={}",
            args.block,
            problem.block_count()
        )));
    }
    let block = args.block - 1;
    let mut ops = Vec::new();
    for label in &args.operators {
        let j = problem
            .observables
            .iter()
            .position(|o| &o.label == label)
            .ok_or_else(|| {
                let known: Vec<&str> = problem.observables.iter().map(|o| o.label.as_str()).collect();
                CliError::Input(format!("unknown operator {label:?}; known: {}", known.join(", ")))
            })?;
        ops.push(problem.embedded_observable(j, block)?);
    }
    let (sel, source) = selection_for(&loaded, args.seed)?;
    let (post, pre) = (sel.post.to_flat(), sel.pre.to_flat());

    writeln!(out, "selection: {source}")?;
    writeln!(out, "block: {} ({})", args.block, problem.space.blocks()[block].label)?;
    writeln!(out, "sigma: {}", num(args.sigma))?;

    if ops.len() == 2 {
        if args.ladder.is_some() {
            return Err(CliError::Input("--ladder needs a single operator".into()));
        }
        let outcome = simulate_joint(&post, &pre, &ops[0], &ops[1], args.g[0], args.g[1], args.sigma)?;
        let mut predicted = 0.0;
        for (k, op) in ops.iter().enumerate() {
            let w = weak_value(&post, &pre, op, DEFAULT_OVERLAP_TOL)?;
            predicted += args.g[k] * w.re;
            writeln!(
                out,
                "operator: {} g {} weak value {} contribution g*Re(w) {}",
                args.operators[k],
                num(args.g[k]),
                complex(w),
                num(args.g[k] * w.re)
            )?;
        }
        writeln!(out, "shift: {}", num(outcome.mean_position_shift))?;
        writeln!(out, "first-order prediction: {}", num(predicted))?;
        writeln!(out, "momentum shift: {}", num(outcome.mean_momentum_shift))?;
        writeln!(
            out,
            "postselection probability: {}",
            num(outcome.postselection_probability)
        )?;
        return Ok(Exit::Success);
    }

    let (op, g) = (&ops[0], args.g[0]);
    let w = weak_value(&post, &pre, op, DEFAULT_OVERLAP_TOL)?;
    let outcome = simulate_pointer(&post, &pre, op, &PointerConfig::new(args.sigma, g)?)?;
    writeln!(out, "operator: {}", args.operators[0])?;
    writeln!(out, "g: {}", num(g))?;
    writeln!(out, "shift: {}", num(outcome.mean_position_shift))?;
    if g != 0.0 {
        writeln!(out, "shift/g: {}", num(outcome.mean_position_shift / g))?;
    } else {
        writeln!(out, "shift/g: undefined at g = 0")?;
    }
    writeln!(out, "Re(weak value): {}", num(w.re))?;
    writeln!(out, "weak value: {}", complex(w))?;
    writeln!(out, "momentum shift: {}", num(outcome.mean_momentum_shift))?;
    writeln!(
        out,
        "postselection probability: {}",
        num(outcome.postselection_probability)
    )?;

    if let Some(k) = args.ladder {
        let t = weak_limit_check(&post, &pre, op, args.sigma, &halving_ladder(g, k + 1))?;
        let mut rows = vec![vec!["g".to_string(), "shift/g".into(), "error".into(), "ratio".into()]];
        for r in &t.rows {
            rows.push(vec![
                num(r.g),
                num(r.shift_over_g),
                num(r.error),
                r.ratio.map_or_else(|| "-".into(), num),
            ]);
        }
        writeln!(out, "convergence:")?;
        write!(out, "{}", table(&rows))?;
        writeln!(
            out,
            "errors decreasing: {}",
            if t.errors_decreasing() { "yes" } else { "no" }
        )?;
    }
    Ok(Exit::Success)
}

pub fn list(out: &mut dyn Write) -> Result<Exit, CliError> {
    for name in BUILTIN_NAMES {
        writeln!(out, "{name}")?;
    }
    Ok(Exit::Success)
}

pub fn export(name: &str, path: &Path, out: &mut dyn Write) -> Result<Exit, CliError> {
    let scenario = builtin(name)
        .ok_or_else(|| CliError::Input(format!("unknown example {name:?}; known: {}", BUILTIN_NAMES.join(", "))))?;
    let text = ScenarioFile::from_scenario(name, &scenario).render();
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    writeln!(out, "wrote {name} to {}", path.display())?;
    Ok(Exit::Success)
}
