//! Scenario file format.
//!
//! One JSON document per scenario. Complex numbers are always `[re, im]`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use pps_core::scenarios::NamedScenario;
use pps_core::{BlockSpace, CMatrix, CVector, Observable, SelectionPair, SeparationProblem, TargetPattern};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub type Pair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockEntry {
    pub label: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorEntry {
    pub label: String,
    pub matrix: Vec<Vec<Pair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub blocks: Vec<BlockEntry>,
    pub operators: Vec<OperatorEntry>,
    pub targets: Vec<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_pre: Option<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_post: Option<Vec<Pair>>,
}

/// A parsed and checked scenario.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub problem: SeparationProblem,
    pub reference: Option<SelectionPair>,
}

fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

fn complex(p: &Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pairs(v: &CVector) -> Vec<Pair> {
    v.iter().map(|z| pair(*z)).collect()
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl ScenarioFile {
    pub fn from_scenario(name: &str, scenario: &NamedScenario) -> Self {
        let problem = &scenario.problem;
        let blocks = problem
            .space
            .blocks()
            .iter()
            .map(|b| BlockEntry {
                label: b.label.clone(),
                dim: b.dim,
            })
            .collect();
        let operators = problem
            .observables
            .iter()
            .map(|o| OperatorEntry {
                label: o.label.clone(),
                matrix: o
                    .matrix
                    .row_iter()
                    .map(|r| r.iter().map(|z| pair(*z)).collect())
                    .collect(),
            })
            .collect();
        let targets = problem
            .target
            .rows()
            .iter()
            .map(|r| r.iter().map(|z| pair(*z)).collect())
            .collect();
        let reference = scenario.reference_selection.as_ref();
        Self {
            name: name.to_string(),
            blocks,
            operators,
            targets,
            reference_pre: reference.map(|s| pairs(&s.pre.to_flat())),
            reference_post: reference.map(|s| pairs(&s.post.to_flat())),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| input(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(msg) => input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical text: two-space indentation, numeric rows kept on one line.
    pub fn render(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        let mut out = String::new();
        write_value(&value, 0, &mut out);
        out.push('\n');
        out
    }

    /// Builds the problem, checking every field against the others.
    pub fn load(&self) -> Result<Loaded, CliError> {
        let space = BlockSpace::new(self.blocks.iter().map(|b| (b.label.clone(), b.dim)))
            .map_err(|e| input(format!("blocks: {e}")))?;
        let mut observables = Vec::with_capacity(self.operators.len());
        for (j, op) in self.operators.iter().enumerate() {
            let n = op.matrix.len();
            if let Some((r, row)) = op.matrix.iter().enumerate().find(|(_, row)| row.len() != n) {
                return Err(input(format!(
                    "operators[{j}] ({}): matrix row {r} has {} entries, expected {n}",
                    op.label,
                    row.len()
                )));
            }
            let entries: Vec<Complex64> = op.matrix.iter().flatten().map(complex).collect();
            observables.push(Observable::new(
                op.label.clone(),
                CMatrix::from_row_slice(n, n, &entries),
            ));
        }
        let rows = self.targets.iter().map(|r| r.iter().map(complex).collect()).collect();
        let problem = SeparationProblem::new(self.name.clone(), space.clone(), observables, TargetPattern::new(rows));
        let violations = problem.validate();
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(input(format!("invalid scenario: {}", list.join("; "))));
        }

        let reference = match (&self.reference_pre, &self.reference_post) {
            (None, None) => None,
            (Some(pre), Some(post)) => {
                let total = space.total_dim();
                for (field, v) in [("reference_pre", pre), ("reference_post", post)] {
                    if v.len() != total {
                        return Err(input(format!("{field}: {} entries, expected {total}", v.len())));
                    }
                }
                let pre = CVector::from_iterator(total, pre.iter().map(complex));
                let post = CVector::from_iterator(total, post.iter().map(complex));
                Some(SelectionPair::from_flat(&space, &post, &pre).map_err(|e| input(format!("reference: {e}")))?)
            }
            _ => return Err(input("reference_pre and reference_post must be given together")),
        };
        Ok(Loaded { problem, reference })
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn is_inline(v: &Value) -> bool {
    match v {
        Value::Array(items) => items
            .iter()
            .all(|i| is_scalar(i) || matches!(i, Value::Array(inner) if inner.iter().all(is_scalar))),
        _ => is_scalar(v),
    }
}

fn write_inline(v: &Value, out: &mut String) {
    match v {
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_inline(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = " ".repeat(indent + 2);
    match v {
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                let _ = write!(out, "{pad}{}: ", Value::String(key.clone()));
                write_value(item, indent + 2, out);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}}}", " ".repeat(indent));
        }
        Value::Array(items) if !items.is_empty() && !is_inline(v) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad);
                write_value(item, indent + 2, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            let _ = write!(out, "{}]", " ".repeat(indent));
        }
        other => write_inline(other, out),
    }
}
