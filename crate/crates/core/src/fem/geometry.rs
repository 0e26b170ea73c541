use nalgebra::{Matrix2, Matrix3x2, Vector2};
use rayon::prelude::*;

use super::{quadrature, FemError, QuadratureRule, ReferenceElement, ShapeValues, MAX_LOCAL_NODES};
use crate::mesh::{node, Order, SurfaceMesh};
use crate::Vec3;

/// `det(JᵀJ)` at or below this value flags a degenerate element.
pub const DEGENERACY_THRESHOLD: f64 = 1e-24;

/// Tangent Jacobian, metric and surface gradients at one point of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub jacobian: Matrix3x2<f64>,
    /// `√det(JᵀJ)`
    pub area_element: f64,
    /// `J (JᵀJ)⁻¹ ∇̂φ̂_i` for every local basis function.
    pub surface_gradients: Vec<Vec3>,
    /// Unit normal `J₁ × J₂ / |J₁ × J₂|`.
    pub normal: Vec3,
    pub shape: ShapeValues,
}

impl ElementGeometry {
    /// Surface gradient of a scalar field with local nodal values `w`.
    pub fn gradient_of(&self, w: &[f64]) -> Vec3 {
        self.surface_gradients
            .iter()
            .zip(w)
            .fold(Vec3::zeros(), |acc, (g, &wi)| acc + g * wi)
    }
}

fn local_positions(mesh: &SurfaceMesh, x: &[f64], element: usize) -> [Vec3; MAX_LOCAL_NODES] {
    let n = mesh.num_nodes();
    let mut p = [Vec3::zeros(); MAX_LOCAL_NODES];
    for (i, &j) in mesh.element(element).iter().enumerate() {
        p[i] = node(x, n, j);
    }
    p
}

struct PointGeometry {
    jacobian: Matrix3x2<f64>,
    det: f64,
    metric_inv: Matrix2<f64>,
}

fn point_geometry(p: &[Vec3], s: &ShapeValues) -> PointGeometry {
    let mut j = Matrix3x2::zeros();
    for (pi, g) in p.iter().zip(s.gradients()) {
        j.column_mut(0).axpy(g[0], pi, 1.0);
        j.column_mut(1).axpy(g[1], pi, 1.0);
    }
    let g = j.transpose() * j;
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let metric_inv = Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)]) / det;
    PointGeometry {
        jacobian: j,
        det,
        metric_inv,
    }
}

/// Geometry of `element` of the surface with nodal vector `x` at reference
/// point `(ξ, η)`.
pub fn element_geometry(
    mesh: &SurfaceMesh,
    x: &[f64],
    element: usize,
    point: [f64; 2],
) -> Result<ElementGeometry, FemError> {
    check_len(mesh, x)?;
    let reference = ReferenceElement::new(mesh.order());
    let shape = reference.eval(point[0], point[1])?;
    let p = local_positions(mesh, x, element);
    let geo = point_geometry(&p[..shape.len], &shape);
    if !(geo.det > DEGENERACY_THRESHOLD) {
        return Err(FemError::Degenerate {
            element,
            det: geo.det,
        });
    }
    let j = geo.jacobian;
    let surface_gradients = shape
        .gradients()
        .iter()
        .map(|g| j * (geo.metric_inv * Vector2::new(g[0], g[1])))
        .collect();
    let normal = j.column(0).cross(&j.column(1)).normalize();
    Ok(ElementGeometry {
        jacobian: j,
        area_element: geo.det.sqrt(),
        surface_gradients,
        normal,
        shape,
    })
}

fn check_len(mesh: &SurfaceMesh, x: &[f64]) -> Result<(), FemError> {
    if x.len() != 3 * mesh.num_nodes() {
        return Err(FemError::DimensionMismatch {
            expected: 3 * mesh.num_nodes(),
            found: x.len(),
        });
    }
    if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
        return Err(FemError::NonFinite(bad));
    }
    Ok(())
}

/// Per-quadrature-point data shared by all assembly routines.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    /// Quadrature weight times area element.
    pub dx: f64,
    pub area_element: f64,
    pub grads: [Vec3; MAX_LOCAL_NODES],
    pub normal: Vec3,
}

/// The discrete surface `Γ_h[x]` evaluated at every quadrature point.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry<'m> {
    mesh: &'m SurfaceMesh,
    rule: QuadratureRule,
    shapes: Vec<ShapeValues>,
    points: Vec<QuadPoint>,
}

/// Default rule: degree `2k`.
pub fn default_rule(order: Order) -> QuadratureRule {
    quadrature(2 * order.degree()).expect("degrees 2 and 4 are supported")
}

impl<'m> SurfaceGeometry<'m> {
    pub fn new(mesh: &'m SurfaceMesh, x: &[f64]) -> Result<Self, FemError> {
        Self::with_rule(mesh, x, default_rule(mesh.order()))
    }

    pub fn with_rule(
        mesh: &'m SurfaceMesh,
        x: &[f64],
        rule: QuadratureRule,
    ) -> Result<Self, FemError> {
        check_len(mesh, x)?;
        let reference = ReferenceElement::new(mesh.order());
        let shapes: Vec<ShapeValues> = rule
            .points
            .iter()
            .map(|p| reference.eval_unchecked(p[0], p[1]))
            .collect();
        let nq = rule.len();
        let mut points = vec![
            QuadPoint {
                dx: 0.0,
                area_element: 0.0,
                grads: [Vec3::zeros(); MAX_LOCAL_NODES],
                normal: Vec3::zeros(),
            };
            nq * mesh.num_elements()
        ];
        points
            .par_chunks_mut(nq)
            .enumerate()
            .try_for_each(|(e, chunk)| {
                let p = local_positions(mesh, x, e);
                for (q, qp) in chunk.iter_mut().enumerate() {
                    let s = &shapes[q];
                    let geo = point_geometry(&p[..s.len], s);
                    if !(geo.det > DEGENERACY_THRESHOLD) {
                        return Err(FemError::Degenerate {
                            element: e,
                            det: geo.det,
                        });
                    }
                    let j = geo.jacobian;
                    for (i, g) in s.gradients().iter().enumerate() {
                        qp.grads[i] = j * (geo.metric_inv * Vector2::new(g[0], g[1]));
                    }
                    let a = geo.det.sqrt();
                    qp.area_element = a;
                    qp.dx = rule.weights[q] * a;
                    qp.normal = j.column(0).cross(&j.column(1)) / a;
                }
                Ok(())
            })?;
        Ok(SurfaceGeometry {
            mesh,
            rule,
            shapes,
            points,
        })
    }

    pub fn mesh(&self) -> &'m SurfaceMesh {
        self.mesh
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn shapes(&self) -> &[ShapeValues] {
        &self.shapes
    }

    /// Quadrature points of element `e`.
    pub fn element_points(&self, e: usize) -> &[QuadPoint] {
        let nq = self.rule.len();
        &self.points[e * nq..(e + 1) * nq]
    }

    pub fn min_area_element(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.area_element)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn area(&self) -> f64 {
        self.points.iter().map(|p| p.dx).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SurfaceMesh;

    fn flat_triangle(scale: f64) -> (SurfaceMesh, Vec<f64>) {
        let pts = vec![
            Vec3::zeros(),
            Vec3::new(scale, 0.0, 0.0),
            Vec3::new(0.0, scale, 0.0),
        ];
        let m = SurfaceMesh::new_unchecked(Order::Linear, 3, vec![0, 1, 2], pts);
        let x = m.nodal_vector();
        (m, x)
    }

    #[test]
    fn planar_unit_triangle() {
        let (m, x) = flat_triangle(1.0);
        let g = element_geometry(&m, &x, 0, [0.2, 0.3]).unwrap();
        assert!((g.area_element - 1.0).abs() < 1e-15);
        // w(x, y) = x has nodal values (0, 1, 0)
        let grad = g.gradient_of(&[0.0, 1.0, 0.0]);
        assert!((grad - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((g.normal - Vec3::z()).norm() < 1e-15);
    }

    #[test]
    fn scaled_triangle_area_element() {
        let (m, x) = flat_triangle(3.0);
        let g = element_geometry(&m, &x, 0, [1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((g.area_element - 9.0).abs() < 1e-13);
    }

    #[test]
    fn identity_field_gradient_is_tangential_projector() {
        let (m, _) = flat_triangle(1.0);
        // tilted triangle
        let pts = vec![
            Vec3::new(0.1, 0.0, 0.3),
            Vec3::new(1.0, 0.2, -0.1),
            Vec3::new(0.2, 0.9, 0.5),
        ];
        let m = m.with_positions(pts).unwrap();
        let x = m.nodal_vector();
        let g = element_geometry(&m, &x, 0, [0.3, 0.3]).unwrap();
        let n = g.normal;
        // ∇_Γ x_ℓ = e_ℓ - n_ℓ n
        for l in 0..3 {
            let w: Vec<f64> = (0..3).map(|j| x[l * 3 + j]).collect();
            let grad = g.gradient_of(&w);
            let mut expected = -n * n[l];
            expected[l] += 1.0;
            assert!((grad - expected).norm() < 1e-14);
        }
        assert!(g.area_element > 0.0);
    }

    #[test]
    fn degenerate_element_is_flagged() {
        let pts = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        let m = SurfaceMesh::new_unchecked(Order::Linear, 3, vec![0, 1, 2], pts);
        let x = m.nodal_vector();
        assert!(matches!(
            element_geometry(&m, &x, 0, [0.2, 0.2]),
            Err(FemError::Degenerate { element: 0, .. })
        ));
        assert!(matches!(
            SurfaceGeometry::new(&m, &x),
            Err(FemError::Degenerate { element: 0, .. })
        ));
    }

    #[test]
    fn non_finite_positions_rejected() {
        let (m, mut x) = flat_triangle(1.0);
        x[4] = f64::NAN;
        assert!(matches!(
            SurfaceGeometry::new(&m, &x),
            Err(FemError::NonFinite(4))
        ));
    }
}
