//! Exact sphere solution, initial data from level functions, discrete
//! error norms and convergence studies.

mod eoc;

use thiserror::Error;

use crate::fem::{Assembler, FemError, SurfaceGeometry};
use crate::flow::{self, FlowConfig, FlowError, NodalState, StepDiagnostics};
use crate::linalg::CsrMatrix;
use crate::mesh::{mesh_width, node, ImplicitSurface, MeshError, SurfaceMesh};
use crate::Vec3;

pub use eoc::{convergence_study, EocRow, EocTable, Protocol, StudyConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("t = {t} is past the extinction time {extinction}")]
    PastExtinction { t: f64, extinction: f64 },
    #[error("level function gradient vanishes at node {0}")]
    VanishingGradient(usize),
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid study: {0}")]
    InvalidStudy(String),
    #[error("flow stopped early at t = {t}: {reason}")]
    EarlyStop { t: f64, reason: String },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("i/o: {0}")]
    Io(String),
}

/// Shrinking sphere `R(t) = √(R₀² - 4t)` with `H = 2/R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSolution {
    pub initial_radius: f64,
}

impl SphereSolution {
    pub fn new(initial_radius: f64) -> Self {
        SphereSolution { initial_radius }
    }

    pub fn extinction_time(&self) -> f64 {
        self.initial_radius.powi(2) / 4.0
    }

    pub fn radius(&self, t: f64) -> Result<f64, AnalysisError> {
        let extinction = self.extinction_time();
        if !(t < extinction) {
            return Err(AnalysisError::PastExtinction { t, extinction });
        }
        Ok((self.initial_radius.powi(2) - 4.0 * t).sqrt())
    }

    pub fn curvature(&self, t: f64) -> Result<f64, AnalysisError> {
        Ok(2.0 / self.radius(t)?)
    }

    /// Exact nodal state at time `t` for nodes `x0` on the initial sphere.
    pub fn reference_state(&self, x0: &[f64], t: f64) -> Result<NodalState, AnalysisError> {
        let r = self.radius(t)?;
        let h = 2.0 / r;
        let n = x0.len() / 3;
        let mut x = vec![0.0; 3 * n];
        let mut v = vec![0.0; 3 * n];
        let mut u = vec![0.0; 4 * n];
        for j in 0..n {
            let p = node(x0, n, j);
            let nu = p / p.norm();
            for l in 0..3 {
                x[l * n + j] = p[l] * r / self.initial_radius;
                v[l * n + j] = -h * nu[l];
                u[l * n + j] = nu[l];
            }
            u[3 * n + j] = h;
        }
        Ok(NodalState { t, x, v, u })
    }
}

/// `(R, H, R/R₀)` of the sphere starting at radius `r0`.
pub fn sphere_exact(r0: f64, t: f64) -> Result<(f64, f64, f64), AnalysisError> {
    let s = SphereSolution::new(r0);
    let r = s.radius(t)?;
    Ok((r, 2.0 / r, r / r0))
}

/// Unit normal `∇d/|∇d|` and mean curvature
/// `(Δd |∇d|² - ∇dᵀ (∇²d) ∇d) / |∇d|³` of a level function at `p`.
pub fn implicit_normal_curvature(surf: &dyn ImplicitSurface, p: &Vec3) -> Option<(Vec3, f64)> {
    let g = surf.gradient(p);
    let len = g.norm();
    if !(len > 0.0) {
        return None;
    }
    let hess = surf.hessian(p);
    let h = (hess.trace() * len * len - g.dot(&(hess * g))) / len.powi(3);
    Some((g / len, h))
}

/// Initial state at `t = 0` with `ν`, `H` interpolated from the level
/// function and `v = -Hν`.
pub fn implicit_initial_data(
    surf: &dyn ImplicitSurface,
    mesh: &SurfaceMesh,
    x0: &[f64],
) -> Result<NodalState, AnalysisError> {
    let n = mesh.num_nodes();
    if x0.len() != 3 * n {
        return Err(AnalysisError::DimensionMismatch {
            expected: 3 * n,
            found: x0.len(),
        });
    }
    let mut v = vec![0.0; 3 * n];
    let mut u = vec![0.0; 4 * n];
    for j in 0..n {
        let (nu, h) = implicit_normal_curvature(surf, &node(x0, n, j))
            .ok_or(AnalysisError::VanishingGradient(j))?;
        for l in 0..3 {
            u[l * n + j] = nu[l];
            v[l * n + j] = -h * nu[l];
        }
        u[3 * n + j] = h;
    }
    Ok(NodalState {
        t: 0.0,
        x: x0.to_vec(),
        v,
        u,
    })
}

/// `(‖e‖_M, |e|_A, ‖e‖_K)` of a scalar or block field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub mass: f64,
    pub stiffness: f64,
    pub energy: f64,
}

fn block_norms(m: &CsrMatrix, a: &CsrMatrix, e: &[f64]) -> Result<Norms, AnalysisError> {
    let n = m.dim();
    if n == 0 || e.len() % n != 0 {
        return Err(AnalysisError::DimensionMismatch {
            expected: n,
            found: e.len(),
        });
    }
    let (mut m2, mut a2) = (0.0, 0.0);
    for b in e.chunks(n) {
        m2 += m.quadratic_form(b);
        a2 += a.quadratic_form(b);
    }
    Ok(Norms {
        mass: m2.sqrt(),
        stiffness: a2.max(0.0).sqrt(),
        energy: (m2 + a2).max(0.0).sqrt(),
    })
}

/// Discrete norms on the surface with nodal vector `x_ref`; `e` may hold
/// any number of length-`N` blocks.
pub fn discrete_norms(
    mesh: &SurfaceMesh,
    x_ref: &[f64],
    e: &[f64],
) -> Result<Norms, AnalysisError> {
    let geom = SurfaceGeometry::new(mesh, x_ref)?;
    let (m, a) = Assembler::new(mesh).mass_stiffness(&geom)?;
    block_norms(&m, &a, e)
}

/// K-norm errors of one state against the exact sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub t: f64,
    pub tau: f64,
    pub h: f64,
    pub x: f64,
    pub v: f64,
    pub nu: f64,
    pub curvature: f64,
}

impl ErrorRecord {
    pub fn values(&self) -> [f64; 4] {
        [self.x, self.v, self.nu, self.curvature]
    }

    /// Componentwise maximum of the error values, keeping `self`'s metadata.
    pub fn max(&self, other: &ErrorRecord) -> ErrorRecord {
        ErrorRecord {
            x: self.x.max(other.x),
            v: self.v.max(other.v),
            nu: self.nu.max(other.nu),
            curvature: self.curvature.max(other.curvature),
            ..*self
        }
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Errors of `state` against the exact sphere in the `K(x*(t))` norm on
/// the interpolated surface. `x0` are the initial nodes on the sphere.
pub fn sphere_errors(
    mesh: &SurfaceMesh,
    x0: &[f64],
    state: &NodalState,
    solution: &SphereSolution,
) -> Result<ErrorRecord, AnalysisError> {
    let n = mesh.num_nodes();
    if state.x.len() != 3 * n || x0.len() != 3 * n {
        return Err(AnalysisError::DimensionMismatch {
            expected: 3 * n,
            found: state.x.len(),
        });
    }
    let reference = solution.reference_state(x0, state.t)?;
    let geom = SurfaceGeometry::new(mesh, &reference.x)?;
    let (m, a) = Assembler::new(mesh).mass_stiffness(&geom)?;
    let k = |e: Vec<f64>| block_norms(&m, &a, &e).map(|nrm| nrm.energy);
    Ok(ErrorRecord {
        t: state.t,
        tau: 0.0,
        h: mesh_width(mesh, &reference.x)?,
        x: k(diff(&state.x, &reference.x))?,
        v: k(diff(&state.v, &reference.v))?,
        nu: k(diff(state.nu(), reference.nu()))?,
        curvature: k(diff(state.curvature(), reference.curvature()))?,
    })
}

/// Runs the sphere flow and returns the maximum over all step times of
/// each error, together with the per-step diagnostics.
pub fn sphere_run_errors(
    mesh: &SurfaceMesh,
    radius: f64,
    config: &FlowConfig,
) -> Result<(ErrorRecord, Vec<StepDiagnostics>), AnalysisError> {
    let solution = SphereSolution::new(radius);
    if config.t_end >= solution.extinction_time() {
        return Err(AnalysisError::PastExtinction {
            t: config.t_end,
            extinction: solution.extinction_time(),
        });
    }
    let x0 = mesh.nodal_vector();
    let initial = solution.reference_state(&x0, 0.0)?;
    let h = mesh_width(mesh, &x0)?;
    let mut worst = ErrorRecord {
        t: 0.0,
        tau: config.tau,
        h,
        x: 0.0,
        v: 0.0,
        nu: 0.0,
        curvature: 0.0,
    };
    let mut failure = None;
    let run = flow::run_flow_with(mesh, initial, config, |state, _| {
        if failure.is_some() {
            return;
        }
        match sphere_errors(mesh, &x0, state, &solution) {
            Ok(e) => worst = worst.max(&e),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if !run.report.stop.is_completed() {
        return Err(AnalysisError::EarlyStop {
            t: run.report.final_time(),
            reason: run.report.stop.to_string(),
        });
    }
    worst.t = run.report.final_time();
    Ok((worst, run.report.rows))
}

/// Neck radius: smallest `√(x₁² + x₂²)` over nodes with `|x₃| < h`.
pub fn neck_radius(mesh: &SurfaceMesh, x: &[f64]) -> Result<Option<f64>, AnalysisError> {
    let h = mesh_width(mesh, x)?;
    let n = mesh.num_nodes();
    Ok((0..n)
        .map(|j| node(x, n, j))
        .filter(|p| p.z.abs() < h)
        .map(|p| p.x.hypot(p.y))
        .min_by(f64::total_cmp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceDiagnostics {
    pub step: StepDiagnostics,
    pub neck_radius: Option<f64>,
}

pub fn diagnostics(
    mesh: &SurfaceMesh,
    state: &NodalState,
) -> Result<SurfaceDiagnostics, AnalysisError> {
    Ok(SurfaceDiagnostics {
        step: flow::state_diagnostics(mesh, state, 0)?,
        neck_radius: neck_radius(mesh, &state.x)?,
    })
}
