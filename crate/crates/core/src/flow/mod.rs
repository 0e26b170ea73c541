//! Time stepping: BDF coefficients, the state history, the coupled
//! linearly implicit step, the classical position-based step and the
//! driver that runs a flow to a final time or a singularity.

mod bdf;
mod run;
mod state;
mod step;

use thiserror::Error;

use crate::fem::FemError;
use crate::linalg::SolveError;
use crate::mesh::MeshError;

pub use bdf::{bdf_coefficients, bdf_coefficients_exact, BdfScheme};
pub use run::{
    bootstrap_start, run_flow, run_flow_with, state_diagnostics, FlowConfig, FlowReport, FlowRun,
    SchemeKind, StartPolicy, StepDiagnostics, StopCriteria, StopReason,
};
pub use state::{extrapolate, normalize_normals, FlowHistory, NodalState};
pub use step::{dziuk_step, esfem_step, geometric_normals, Integrator, StepOutcome, StepStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite values in the state at t = {0}")]
    NonFinite(f64),
    #[error("normal vector at node {0} vanishes")]
    ZeroNormal(usize),
    #[error("history: {0}")]
    History(String),
    #[error("step needs {needed} previous states, history holds {available}")]
    InsufficientHistory { needed: usize, available: usize },
}

impl FlowError {
    /// Failures that indicate the discrete surface has broken down rather
    /// than a usage error.
    pub fn is_breakdown(&self) -> bool {
        matches!(
            self,
            FlowError::Fem(FemError::Degenerate { .. })
                | FlowError::Fem(FemError::NonFinite(_))
                | FlowError::Solve(SolveError::NotConverged { .. })
                | FlowError::Solve(SolveError::Breakdown(_))
                | FlowError::NonFinite(_)
                | FlowError::ZeroNormal(_)
        )
    }
}
