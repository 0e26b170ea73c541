use rayon::prelude::*;

use super::{extrapolate, BdfScheme, FlowError, FlowHistory, NodalState};
use crate::fem::{element_geometry, Assembler, ReferenceElement, SurfaceGeometry};
use crate::linalg::{multi_rhs_solve, CgConfig, CgSolution, CsrMatrix};
use crate::mesh::SurfaceMesh;
use crate::Vec3;

/// Work done in one time step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    /// Surface geometry evaluations followed by matrix assembly.
    pub assemblies: usize,
    /// Right-hand sides solved with `K = M + A`.
    pub velocity_solves: usize,
    /// Right-hand sides solved with `(δ₀/τ) M + A`.
    pub shifted_solves: usize,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: NodalState,
    pub stats: StepStats,
}

/// Reusable per-mesh data for advancing the flow.
#[derive(Debug, Clone)]
pub struct Integrator<'m> {
    mesh: &'m SurfaceMesh,
    assembler: Assembler,
    cg: CgConfig,
}

fn split<'a>(v: &'a [f64], n: usize, blocks: usize) -> Vec<&'a [f64]> {
    (0..blocks).map(|b| &v[b * n..(b + 1) * n]).collect()
}

fn join(columns: Vec<CgSolution>) -> (Vec<f64>, usize) {
    let iterations = columns.iter().map(|c| c.iterations).sum();
    (columns.into_iter().flat_map(|c| c.x).collect(), iterations)
}

impl<'m> Integrator<'m> {
    pub fn new(mesh: &'m SurfaceMesh, cg: CgConfig) -> Self {
        Integrator {
            mesh,
            assembler: Assembler::new(mesh),
            cg,
        }
    }

    pub fn mesh(&self) -> &'m SurfaceMesh {
        self.mesh
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn cg(&self) -> &CgConfig {
        &self.cg
    }

    fn check_tau(tau: f64) -> Result<(), FlowError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(FlowError::InvalidConfig(format!(
                "step size must be positive, got {tau}"
            )));
        }
        Ok(())
    }

    /// `((δ₀/τ) M + A) yⁿ = rhs - (1/τ) M Σ_{j≥1} δ_j y^{n-j}`, one column per block.
    fn shifted_solve(
        &self,
        m: &CsrMatrix,
        a: &CsrMatrix,
        scheme: &BdfScheme,
        tau: f64,
        rhs: Option<&[f64]>,
        history_sum: &[f64],
        guess: &[f64],
    ) -> Result<(Vec<f64>, usize), FlowError> {
        let n = self.mesh.num_nodes();
        let blocks = history_sum.len() / n;
        let shifted = m.linear_combination(scheme.delta()[0] / tau, a, 1.0)?;
        let mut b = m.mul_block(history_sum, n);
        b.iter_mut().for_each(|v| *v *= -1.0 / tau);
        if let Some(r) = rhs {
            b.iter_mut().zip(r).for_each(|(v, r)| *v += r);
        }
        let cols = multi_rhs_solve(
            &shifted,
            &split(&b, n, blocks),
            Some(&split(guess, n, blocks)),
            &self.cg,
        )?;
        Ok(join(cols))
    }

    /// One linearly implicit step of the coupled velocity/normal/curvature
    /// system. `history` must hold at least `q` states spaced by `tau`.
    pub fn esfem_step(
        &self,
        history: &FlowHistory,
        scheme: &BdfScheme,
        tau: f64,
        alpha: f64,
    ) -> Result<StepOutcome, FlowError> {
        Self::check_tau(tau)?;
        if !(alpha >= 0.0) {
            return Err(FlowError::InvalidConfig(format!(
                "stabilization parameter must be non-negative, got {alpha}"
            )));
        }
        let q = scheme.order();
        let n = self.mesh.num_nodes();
        let (x_tilde, u_tilde) = extrapolate(history, scheme)?;
        let latest = history.latest().expect("extrapolation checked length");

        let geom = SurfaceGeometry::new(self.mesh, &x_tilde)?;
        let (m, a) = self.assembler.mass_stiffness(&geom)?;
        let k = m.linear_combination(1.0, &a, 1.0)?;
        let g = self.assembler.velocity_load(&geom, &u_tilde)?;
        let mut f = self.assembler.reaction_load(&geom, &u_tilde)?;
        if alpha > 0.0 {
            let s = self
                .assembler
                .normal_stabilization(&geom, &u_tilde[..3 * n], alpha)?;
            f[..3 * n].iter_mut().zip(&s).for_each(|(fi, si)| *fi += si);
        }

        let cols = multi_rhs_solve(
            &k,
            &split(&g, n, 3),
            Some(&split(&latest.v, n, 3)),
            &self.cg,
        )?;
        let (v, velocity_iterations) = join(cols);

        let us = history.recent(q, |s| &s.u)?;
        let (u, shifted_iterations) = self.shifted_solve(
            &m,
            &a,
            scheme,
            tau,
            Some(&f),
            &scheme.history_sum(&us),
            &u_tilde,
        )?;

        let xs = history.recent(q, |s| &s.x)?;
        let hist_x = scheme.history_sum(&xs);
        let d0 = scheme.delta()[0];
        let x: Vec<f64> = v
            .iter()
            .zip(&hist_x)
            .map(|(vi, hi)| (tau * vi - hi) / d0)
            .collect();

        let state = NodalState::new(latest.t + tau, x, v, u)?;
        Ok(StepOutcome {
            state,
            stats: StepStats {
                assemblies: 1,
                velocity_solves: 3,
                shifted_solves: 4,
                cg_iterations: velocity_iterations + shifted_iterations,
            },
        })
    }

    /// One step of the classical position-based scheme
    /// `((δ₀/τ) M(x̃) + A(x̃)) xⁿ = -(1/τ) M(x̃) Σ_{j≥1} δ_j x^{n-j}`.
    ///
    /// The returned velocity is the BDF difference quotient, the normal is
    /// averaged from the element normals and `H_j = -v_j·ν_j`.
    pub fn dziuk_step(
        &self,
        history: &FlowHistory,
        scheme: &BdfScheme,
        tau: f64,
    ) -> Result<StepOutcome, FlowError> {
        Self::check_tau(tau)?;
        let q = scheme.order();
        let n = self.mesh.num_nodes();
        let (x_tilde, _) = extrapolate(history, scheme)?;
        let latest = history.latest().expect("extrapolation checked length");

        let geom = SurfaceGeometry::new(self.mesh, &x_tilde)?;
        let (m, a) = self.assembler.mass_stiffness(&geom)?;
        let xs = history.recent(q, |s| &s.x)?;
        let hist_x = scheme.history_sum(&xs);
        let (x, iterations) = self.shifted_solve(&m, &a, scheme, tau, None, &hist_x, &x_tilde)?;

        let d0 = scheme.delta()[0];
        let v: Vec<f64> = x
            .iter()
            .zip(&hist_x)
            .map(|(xi, hi)| (d0 * xi + hi) / tau)
            .collect();
        let nu = geometric_normals(self.mesh, &x)?;
        let h: Vec<f64> = (0..n)
            .map(|j| -(0..3).map(|l| v[l * n + j] * nu[l * n + j]).sum::<f64>())
            .collect();
        let mut u = nu;
        u.extend(h);

        let state = NodalState::new(latest.t + tau, x, v, u)?;
        Ok(StepOutcome {
            state,
            stats: StepStats {
                assemblies: 1,
                velocity_solves: 0,
                shifted_solves: 3,
                cg_iterations: iterations,
            },
        })
    }
}

/// Unit nodal normals averaged from the area-weighted element normals
/// evaluated at each element's local nodes.
pub fn geometric_normals(mesh: &SurfaceMesh, x: &[f64]) -> Result<Vec<f64>, FlowError> {
    let n = mesh.num_nodes();
    let reference = ReferenceElement::new(mesh.order());
    let k = reference.num_nodes();
    let locals: Vec<Vec<Vec3>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            (0..k)
                .map(|i| {
                    element_geometry(mesh, x, e, reference.node(i))
                        .map(|g| g.normal * g.area_element)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut acc = vec![Vec3::zeros(); n];
    for (e, normals) in locals.iter().enumerate() {
        for (&j, w) in mesh.element(e).iter().zip(normals) {
            acc[j] += w;
        }
    }
    let mut out = vec![0.0; 3 * n];
    for (j, a) in acc.iter().enumerate() {
        let len = a.norm();
        if !(len > 0.0) {
            return Err(FlowError::ZeroNormal(j));
        }
        for l in 0..3 {
            out[l * n + j] = a[l] / len;
        }
    }
    Ok(out)
}

/// One coupled step with a fresh [`Integrator`] and default solver settings.
pub fn esfem_step(
    mesh: &SurfaceMesh,
    history: &FlowHistory,
    scheme: &BdfScheme,
    tau: f64,
    alpha: f64,
) -> Result<StepOutcome, FlowError> {
    Integrator::new(mesh, CgConfig::default()).esfem_step(history, scheme, tau, alpha)
}

pub fn dziuk_step(
    mesh: &SurfaceMesh,
    history: &FlowHistory,
    scheme: &BdfScheme,
    tau: f64,
) -> Result<StepOutcome, FlowError> {
    Integrator::new(mesh, CgConfig::default()).dziuk_step(history, scheme, tau)
}
