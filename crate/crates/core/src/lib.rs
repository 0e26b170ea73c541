//! Mean curvature flow of closed surfaces with evolving surface finite
//! elements and linearly implicit backward difference formulae.
//!
//! The surface is carried by the nodes of an isoparametric triangulation
//! (degree 1 or 2). Instead of discretizing `v = Δx` directly, the normal
//! vector `ν` and mean curvature `H` are evolved by their own parabolic
//! equations and the velocity is obtained from `v = -Hν` through an H¹
//! projection. Each time step solves only linear symmetric positive
//! definite systems assembled on an extrapolated surface.

pub mod analysis;
pub mod fem;
pub mod flow;
pub mod linalg;
pub mod mesh;

pub type Vec3 = nalgebra::Vector3<f64>;
