use nalgebra::Matrix3;

use super::{build_icosphere, elevate_to_quadratic, MeshError, Order, SurfaceMesh};
use crate::Vec3;

pub const DEFAULT_PROJECTION_ITERATIONS: usize = 50;

/// A surface given as the zero level set of a smooth function that is
/// negative inside.
pub trait ImplicitSurface: Send + Sync {
    fn value(&self, p: &Vec3) -> f64;
    fn gradient(&self, p: &Vec3) -> Vec3;
    fn hessian(&self, p: &Vec3) -> Matrix3<f64>;
}

/// Sphere as the distance level set `|x - c| - R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn new(radius: f64) -> Self {
        Sphere {
            center: Vec3::zeros(),
            radius,
        }
    }
}

impl ImplicitSurface for Sphere {
    fn value(&self, p: &Vec3) -> f64 {
        (p - self.center).norm() - self.radius
    }

    fn gradient(&self, p: &Vec3) -> Vec3 {
        let r = p - self.center;
        let n = r.norm();
        if n == 0.0 {
            Vec3::zeros()
        } else {
            r / n
        }
    }

    fn hessian(&self, p: &Vec3) -> Matrix3<f64> {
        let r = p - self.center;
        let n = r.norm();
        if n == 0.0 {
            return Matrix3::zeros();
        }
        let u = r / n;
        (Matrix3::identity() - u * u.transpose()) / n
    }
}

/// `d(x) = x₁² + x₂² + G(x₃²) - c` with `G(s) = 2s(s - a)`; the default
/// parameters `a = 199/200`, `c = 0.04` give a dumbbell whose neck has
/// radius 0.2 and which pinches off under mean curvature flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dumbbell {
    pub neck_parameter: f64,
    pub offset: f64,
}

impl Default for Dumbbell {
    fn default() -> Self {
        Dumbbell {
            neck_parameter: 199.0 / 200.0,
            offset: 0.04,
        }
    }
}

impl Dumbbell {
    fn g(&self, s: f64) -> f64 {
        2.0 * s * (s - self.neck_parameter)
    }

    fn dg(&self, s: f64) -> f64 {
        4.0 * s - 2.0 * self.neck_parameter
    }

    const D2G: f64 = 4.0;

    /// Largest distance from the x₃ axis, attained where `G` is minimal.
    pub fn max_radius(&self) -> f64 {
        let s = self.neck_parameter / 2.0;
        (self.offset - self.g(s)).sqrt()
    }

    pub fn neck_radius(&self) -> f64 {
        self.offset.sqrt()
    }
}

/// Positive root `z` of `c - G(z²) = 0`, the half extent of the dumbbell
/// along its axis.
pub fn dumbbell_half_height(surf: &Dumbbell) -> f64 {
    // 2s² - 2a s - c = 0
    let a = surf.neck_parameter;
    let s = (2.0 * a + (4.0 * a * a + 8.0 * surf.offset).sqrt()) / 4.0;
    s.sqrt()
}

impl ImplicitSurface for Dumbbell {
    fn value(&self, p: &Vec3) -> f64 {
        p.x * p.x + p.y * p.y + self.g(p.z * p.z) - self.offset
    }

    fn gradient(&self, p: &Vec3) -> Vec3 {
        Vec3::new(2.0 * p.x, 2.0 * p.y, 2.0 * p.z * self.dg(p.z * p.z))
    }

    fn hessian(&self, p: &Vec3) -> Matrix3<f64> {
        let s = p.z * p.z;
        Matrix3::from_diagonal(&Vec3::new(2.0, 2.0, 2.0 * self.dg(s) + 4.0 * s * Self::D2G))
    }
}

/// Newton-type projection `p ← p - d(p) ∇d(p) / |∇d(p)|²` until `|d| ≤ tol`.
pub fn project_point(
    surf: &dyn ImplicitSurface,
    mut p: Vec3,
    tol: f64,
    max_iterations: usize,
) -> Result<Vec3, f64> {
    for _ in 0..=max_iterations {
        let d = surf.value(&p);
        if d.abs() <= tol {
            return Ok(p);
        }
        let g = surf.gradient(&p);
        let g2 = g.norm_squared();
        if !(g2 > 0.0) || !d.is_finite() {
            return Err(d);
        }
        p -= g * (d / g2);
    }
    Err(surf.value(&p))
}

/// Projects every node onto `surf`. Connectivity is unchanged.
pub fn project_to_implicit(
    mesh: &SurfaceMesh,
    surf: &dyn ImplicitSurface,
    tol: f64,
) -> Result<SurfaceMesh, MeshError> {
    let positions = mesh
        .reference_positions()
        .iter()
        .enumerate()
        .map(|(node, &p)| {
            project_point(surf, p, tol, DEFAULT_PROJECTION_ITERATIONS)
                .map_err(|residual| MeshError::ProjectionFailed { node, residual })
        })
        .collect::<Result<Vec<_>, _>>()?;
    mesh.with_positions(positions)
}

/// Icosphere of the given radius; quadratic midnodes are projected onto
/// the sphere.
pub fn build_sphere(
    subdivisions: u32,
    radius: f64,
    order: Order,
) -> Result<SurfaceMesh, MeshError> {
    let mesh = build_icosphere(subdivisions, radius)?;
    match order {
        Order::Linear => Ok(mesh),
        Order::Quadratic => elevate_to_quadratic(&mesh, Some(&Sphere::new(radius)), 1e-14),
    }
}

/// Dumbbell mesh: an icosphere stretched to the bounding box of the level
/// set, then projected onto it node by node.
pub fn build_dumbbell(
    surf: &Dumbbell,
    subdivisions: u32,
    order: Order,
    tol: f64,
) -> Result<SurfaceMesh, MeshError> {
    let sphere = build_icosphere(subdivisions, 1.0)?;
    let rmax = surf.max_radius();
    let zmax = dumbbell_half_height(surf);
    let stretched: Vec<Vec3> = sphere
        .reference_positions()
        .iter()
        .map(|p| Vec3::new(p.x * rmax, p.y * rmax, p.z * zmax))
        .collect();
    let mesh = sphere.with_positions(stretched)?;
    let mesh = project_to_implicit(&mesh, surf, tol)?;
    match order {
        Order::Linear => Ok(mesh),
        Order::Quadratic => elevate_to_quadratic(&mesh, Some(surf), tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_projection_onto_unit_sphere() {
        let s = Sphere::new(1.0);
        let p = project_point(&s, Vec3::new(0.0, 0.0, 2.0), 1e-14, 50).unwrap();
        assert!((p - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn dumbbell_neck_projection() {
        let d = Dumbbell::default();
        let p = project_point(&d, Vec3::new(0.3, 0.0, 0.0), 1e-14, 50).unwrap();
        assert!((p.x - 0.2).abs() < 1e-12, "{p:?}");
        assert_eq!(p.y, 0.0);
        assert_eq!(p.z, 0.0);
    }

    #[test]
    fn point_on_surface_is_fixed() {
        let d = Dumbbell::default();
        let p = Vec3::new(0.2, 0.0, 0.0);
        assert_eq!(project_point(&d, p, 1e-12, 50).unwrap(), p);
    }

    #[test]
    fn dumbbell_extents() {
        let d = Dumbbell::default();
        let z = dumbbell_half_height(&d);
        // positive root of 0.04 - 2z⁴ + 1.99z² = 0
        assert!((0.04 - 2.0 * z.powi(4) + 1.99 * z * z).abs() < 1e-14);
        assert!((z - 1.0073).abs() < 1e-4);
        assert!(d.value(&Vec3::new(0.0, 0.0, z)).abs() < 1e-14);
        let r = d.max_radius();
        assert!(d.value(&Vec3::new(r, 0.0, (199.0f64 / 400.0).sqrt())).abs() < 1e-14);
    }

    #[test]
    fn dumbbell_derivatives_match_finite_differences() {
        let d = Dumbbell::default();
        let p = Vec3::new(0.3, -0.2, 0.7);
        let eps = 1e-6;
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = eps;
            let fd = (d.value(&(p + e)) - d.value(&(p - e))) / (2.0 * eps);
            assert!((fd - d.gradient(&p)[i]).abs() < 1e-8);
            let fdh = (d.gradient(&(p + e)) - d.gradient(&(p - e))) / (2.0 * eps);
            for j in 0..3 {
                assert!((fdh[j] - d.hessian(&p)[(j, i)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn projection_failure_names_node() {
        let s = Sphere::new(1.0);
        let m = build_icosphere(0, 1.0).unwrap();
        let mut pts = m.reference_positions().to_vec();
        pts[7] = Vec3::zeros();
        let m = m.with_positions(pts).unwrap();
        match project_to_implicit(&m, &s, 1e-12).unwrap_err() {
            MeshError::ProjectionFailed { node, .. } => assert_eq!(node, 7),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn dumbbell_mesh_is_closed_and_on_surface() {
        let d = Dumbbell::default();
        let m = build_dumbbell(&d, 2, Order::Quadratic, 1e-12).unwrap();
        m.validate().unwrap();
        assert!(m.signed_volume() > 0.0);
        for p in m.reference_positions() {
            assert!(d.value(p).abs() <= 1e-12);
        }
    }
}
