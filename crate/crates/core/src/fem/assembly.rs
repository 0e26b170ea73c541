use std::sync::Arc;

use rayon::prelude::*;

use super::{FemError, QuadPoint, SurfaceGeometry, MAX_LOCAL_NODES};
use crate::linalg::{CsrMatrix, SparsityPattern};
use crate::mesh::SurfaceMesh;
use crate::Vec3;

const LOCAL_MATRIX: usize = MAX_LOCAL_NODES * MAX_LOCAL_NODES;

/// Sparsity pattern of a mesh plus the element-to-value scatter map.
///
/// Element contributions are computed in parallel and summed into the global
/// arrays sequentially in element order, so assembled values are bitwise
/// reproducible regardless of thread count.
#[derive(Debug, Clone)]
pub struct Assembler {
    pattern: Arc<SparsityPattern>,
    scatter: Vec<usize>,
    nodes_per_element: usize,
    num_nodes: usize,
}

impl Assembler {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        let n = mesh.num_nodes();
        let k = mesh.order().nodes_per_element();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in mesh.elements() {
            for &i in el {
                rows[i].extend_from_slice(el);
            }
        }
        let pattern = SparsityPattern::from_rows(rows);
        let mut scatter = Vec::with_capacity(mesh.num_elements() * k * k);
        for el in mesh.elements() {
            for &i in el {
                for &j in el {
                    scatter.push(pattern.index_of(i, j).expect("pattern covers element"));
                }
            }
        }
        Assembler {
            pattern: Arc::new(pattern),
            scatter,
            nodes_per_element: k,
            num_nodes: n,
        }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    fn check(&self, geom: &SurfaceGeometry<'_>) -> Result<(), FemError> {
        if geom.mesh().num_nodes() != self.num_nodes
            || geom.mesh().order().nodes_per_element() != self.nodes_per_element
        {
            return Err(FemError::DimensionMismatch {
                expected: self.num_nodes,
                found: geom.mesh().num_nodes(),
            });
        }
        Ok(())
    }

    /// Mass and stiffness matrices on a shared pattern.
    pub fn mass_stiffness(
        &self,
        geom: &SurfaceGeometry<'_>,
    ) -> Result<(CsrMatrix, CsrMatrix), FemError> {
        self.check(geom)?;
        let k = self.nodes_per_element;
        let shapes = geom.shapes();
        let locals: Vec<([f64; LOCAL_MATRIX], [f64; LOCAL_MATRIX])> =
            (0..geom.mesh().num_elements())
                .into_par_iter()
                .map(|e| {
                    let mut m = [0.0; LOCAL_MATRIX];
                    let mut a = [0.0; LOCAL_MATRIX];
                    for (q, qp) in geom.element_points(e).iter().enumerate() {
                        let phi = shapes[q].values();
                        for i in 0..k {
                            for j in 0..k {
                                m[i * k + j] += qp.dx * phi[i] * phi[j];
                                a[i * k + j] += qp.dx * qp.grads[i].dot(&qp.grads[j]);
                            }
                        }
                    }
                    (m, a)
                })
                .collect();
        let mut mass = CsrMatrix::zeros(Arc::clone(&self.pattern));
        let mut stiff = CsrMatrix::zeros(Arc::clone(&self.pattern));
        {
            let (mv, av) = (mass.values_mut(), stiff.values_mut());
            for (e, (m, a)) in locals.iter().enumerate() {
                let map = &self.scatter[e * k * k..(e + 1) * k * k];
                for (l, &pos) in map.iter().enumerate() {
                    mv[pos] += m[l];
                    av[pos] += a[l];
                }
            }
        }
        Ok((mass, stiff))
    }

    /// Assembles `blocks` load vectors (component-major, `blocks·N` entries)
    /// from a per-quadrature-point kernel writing `out[b·k + i]`.
    fn load<F>(&self, geom: &SurfaceGeometry<'_>, blocks: usize, kernel: F) -> Vec<f64>
    where
        F: Fn(usize, usize, &QuadPoint, &[f64], &mut [f64]) + Sync,
    {
        let k = self.nodes_per_element;
        let n = self.num_nodes;
        let shapes = geom.shapes();
        let locals: Vec<Vec<f64>> = (0..geom.mesh().num_elements())
            .into_par_iter()
            .map(|e| {
                let mut out = vec![0.0; blocks * k];
                for (q, qp) in geom.element_points(e).iter().enumerate() {
                    kernel(e, q, qp, shapes[q].values(), &mut out);
                }
                out
            })
            .collect();
        let mut global = vec![0.0; blocks * n];
        for (e, out) in locals.iter().enumerate() {
            let el = geom.mesh().element(e);
            for b in 0..blocks {
                for (i, &node) in el.iter().enumerate() {
                    global[b * n + node] += out[b * k + i];
                }
            }
        }
        global
    }
}

/// Finite element function values and gradients at one quadrature point.
struct Interp<'a> {
    el: &'a [usize],
    n: usize,
}

impl Interp<'_> {
    fn value(&self, field: &[f64], block: usize, phi: &[f64]) -> f64 {
        self.el
            .iter()
            .zip(phi)
            .map(|(&j, p)| field[block * self.n + j] * p)
            .sum()
    }

    fn gradient(&self, field: &[f64], block: usize, qp: &QuadPoint) -> Vec3 {
        self.el
            .iter()
            .enumerate()
            .fold(Vec3::zeros(), |acc, (i, &j)| {
                acc + qp.grads[i] * field[block * self.n + j]
            })
    }
}

fn check_field(name: &'static str, v: &[f64], expected: usize) -> Result<(), FemError> {
    if v.len() != expected {
        return Err(FemError::FieldLength {
            name,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

impl Assembler {
    /// `g(x,u)`: `g_{j,ℓ} = -∫ H_h (ν_h)_ℓ φ_j - ∫ ∇(H_h (ν_h)_ℓ)·∇φ_j`, with
    /// the product formed pointwise. `u = (ν, H)` has `4N` entries.
    pub fn velocity_load(
        &self,
        geom: &SurfaceGeometry<'_>,
        u: &[f64],
    ) -> Result<Vec<f64>, FemError> {
        self.check(geom)?;
        let n = self.num_nodes;
        check_field("u", u, 4 * n)?;
        let k = self.nodes_per_element;
        Ok(self.load(geom, 3, |e, _q, qp, phi, out| {
            let it = Interp {
                el: geom.mesh().element(e),
                n,
            };
            let h = it.value(u, 3, phi);
            let grad_h = it.gradient(u, 3, qp);
            for l in 0..3 {
                let nu_l = it.value(u, l, phi);
                let w = h * nu_l;
                let grad_w = grad_h * nu_l + it.gradient(u, l, qp) * h;
                for i in 0..k {
                    out[l * k + i] -= qp.dx * (w * phi[i] + grad_w.dot(&qp.grads[i]));
                }
            }
        }))
    }

    /// `f(x,u)`: `f₁ = ∫ α² (ν_h)_ℓ φ_j`, `f₂ = ∫ α² H_h φ_j` with
    /// `α² = |∇ν_h|²` (Frobenius), evaluated pointwise.
    pub fn reaction_load(
        &self,
        geom: &SurfaceGeometry<'_>,
        u: &[f64],
    ) -> Result<Vec<f64>, FemError> {
        self.check(geom)?;
        let n = self.num_nodes;
        check_field("u", u, 4 * n)?;
        let k = self.nodes_per_element;
        Ok(self.load(geom, 4, |e, _q, qp, phi, out| {
            let it = Interp {
                el: geom.mesh().element(e),
                n,
            };
            let alpha2: f64 = (0..3).map(|l| it.gradient(u, l, qp).norm_squared()).sum();
            for b in 0..4 {
                let c = qp.dx * alpha2 * it.value(u, b, phi);
                for i in 0..k {
                    out[b * k + i] += c * phi[i];
                }
            }
        }))
    }

    /// `-α ∫ (ν_h - ν_Γh)·φ` against vector test functions, where `ν_Γh` is
    /// the oriented unit normal of the discrete surface. `nu` has `3N` entries.
    pub fn normal_stabilization(
        &self,
        geom: &SurfaceGeometry<'_>,
        nu: &[f64],
        alpha: f64,
    ) -> Result<Vec<f64>, FemError> {
        self.check(geom)?;
        let n = self.num_nodes;
        check_field("nu", nu, 3 * n)?;
        if alpha == 0.0 {
            return Ok(vec![0.0; 3 * n]);
        }
        let k = self.nodes_per_element;
        Ok(self.load(geom, 3, |e, _q, qp, phi, out| {
            let it = Interp {
                el: geom.mesh().element(e),
                n,
            };
            for l in 0..3 {
                let c = -alpha * qp.dx * (it.value(nu, l, phi) - qp.normal[l]);
                for i in 0..k {
                    out[l * k + i] += c * phi[i];
                }
            }
        }))
    }

    /// Values of `α² = |∇ν_h|²` at all quadrature points, element by element.
    pub fn alpha_squared(
        &self,
        geom: &SurfaceGeometry<'_>,
        nu: &[f64],
    ) -> Result<Vec<f64>, FemError> {
        self.check(geom)?;
        let n = self.num_nodes;
        check_field("nu", nu, 3 * n)?;
        let mut out = Vec::new();
        for e in 0..geom.mesh().num_elements() {
            let it = Interp {
                el: geom.mesh().element(e),
                n,
            };
            for qp in geom.element_points(e) {
                out.push((0..3).map(|l| it.gradient(nu, l, qp).norm_squared()).sum());
            }
        }
        Ok(out)
    }
}

/// `M(x)_ij = ∫ φ_i φ_j` on the surface with nodal vector `x`.
pub fn assemble_mass(mesh: &SurfaceMesh, x: &[f64]) -> Result<CsrMatrix, FemError> {
    let geom = SurfaceGeometry::new(mesh, x)?;
    Ok(Assembler::new(mesh).mass_stiffness(&geom)?.0)
}

/// `A(x)_ij = ∫ ∇φ_i · ∇φ_j` on the surface with nodal vector `x`.
pub fn assemble_stiffness(mesh: &SurfaceMesh, x: &[f64]) -> Result<CsrMatrix, FemError> {
    let geom = SurfaceGeometry::new(mesh, x)?;
    Ok(Assembler::new(mesh).mass_stiffness(&geom)?.1)
}

pub fn assemble_g(mesh: &SurfaceMesh, x: &[f64], u: &[f64]) -> Result<Vec<f64>, FemError> {
    let geom = SurfaceGeometry::new(mesh, x)?;
    Assembler::new(mesh).velocity_load(&geom, u)
}

pub fn assemble_f(mesh: &SurfaceMesh, x: &[f64], u: &[f64]) -> Result<Vec<f64>, FemError> {
    let geom = SurfaceGeometry::new(mesh, x)?;
    Assembler::new(mesh).reaction_load(&geom, u)
}

pub fn stabilization_term(
    mesh: &SurfaceMesh,
    x: &[f64],
    nu: &[f64],
    alpha: f64,
) -> Result<Vec<f64>, FemError> {
    if !(alpha >= 0.0) {
        return Err(FemError::InvalidParameter(format!(
            "stabilization parameter must be non-negative, got {alpha}"
        )));
    }
    let geom = SurfaceGeometry::new(mesh, x)?;
    Assembler::new(mesh).normal_stabilization(&geom, nu, alpha)
}
