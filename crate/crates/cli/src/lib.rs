//! Command-line front end: scenario files in, reports and exit codes out.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use pps_core::hilbert::DEFAULT_REL_TOL;
use pps_core::weakvalue::DEFAULT_PATTERN_TOL;
use pps_core::PpsError;

mod commands;
pub mod file;
pub mod format;

pub use file::{Loaded, ScenarioFile};

/// Process exit status. The numeric values are part of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    InputError = 1,
    LinearInfeasible = 2,
    Rank1NotFound = 3,
    Orthogonal = 4,
    MissingSelection = 5,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("selections are orthogonal: <Phi|Psi> = {} ≈ 0", format::complex(*.0))]
    Orthogonal(Complex64),
    #[error("no selection available: {0}")]
    MissingSelection(String),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            Self::Input(_) | Self::Io(_) => Exit::InputError,
            Self::Orthogonal(_) => Exit::Orthogonal,
            Self::MissingSelection(_) => Exit::MissingSelection,
        }
    }
}

impl From<PpsError> for CliError {
    fn from(e: PpsError) -> Self {
        match e {
            PpsError::PostSelectionOrthogonal { overlap } => Self::Orthogonal(overlap),
            PpsError::OrthogonalSelections => Self::Orthogonal(Complex64::new(0.0, 0.0)),
            other => Self::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pps",
    version,
    about = "Find pre- and post-selections that separate observables across blocks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-block rank test of the linear system.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        tol: f64,
    },
    /// Full pipeline: linear stage, rank-1 search, assembly, verification.
    Solve {
        file: PathBuf,
        #[arg(long, env = "PPS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        starts: Option<usize>,
        /// Relative rank tolerance of the linear stage.
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Weak-value table of given states against the file's targets.
    WeakValues {
        file: PathBuf,
        /// Comma-separated complex entries, e.g. `0.5,0.5i,1-2i`.
        #[arg(long, allow_hyphen_values = true)]
        pre: String,
        #[arg(long, allow_hyphen_values = true)]
        post: String,
        #[arg(long, default_value_t = DEFAULT_PATTERN_TOL)]
        tol: f64,
    },
    /// Gaussian pointer readout. Two `--operator`/`--g` pairs couple both
    /// operators to the same pointer.
    Simulate {
        file: PathBuf,
        #[arg(long = "operator", required = true)]
        operators: Vec<String>,
        /// 1-based block index.
        #[arg(long)]
        block: usize,
        #[arg(long = "g", required = true, allow_negative_numbers = true)]
        g: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Number of coupling halvings for the convergence table.
        #[arg(long)]
        ladder: Option<usize>,
        #[arg(long, env = "PPS_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Built-in scenarios.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExamplesAction {
    List,
    Export { name: String, path: PathBuf },
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Exit, CliError> {
    match cli.command {
        Command::Check { file, tol } => commands::check(&file, tol, out),
        Command::Solve {
            file,
            seed,
            starts,
            tol,
            json,
        } => commands::solve(&file, seed, starts, tol, json, out),
        Command::WeakValues { file, pre, post, tol } => commands::weak_values(&file, &pre, &post, tol, out),
        Command::Simulate {
            file,
            operators,
            block,
            g,
            sigma,
            ladder,
            seed,
        } => commands::simulate(
            &file,
            &commands::SimulateArgs {
                operators,
                block,
                g,
                sigma,
                ladder,
                seed,
            },
            out,
        ),
        Command::Examples { action } => match action {
            ExamplesAction::List => commands::list(out),
            ExamplesAction::Export { name, path } => commands::export(&name, &path, out),
        },
    }
}
