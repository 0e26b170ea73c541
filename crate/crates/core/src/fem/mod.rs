//! Reference elements, quadrature, and assembly of the surface-dependent
//! matrices and nonlinear load vectors.

mod assembly;
mod geometry;
mod quadrature;
mod reference;

use thiserror::Error;

pub use assembly::{
    assemble_f, assemble_g, assemble_mass, assemble_stiffness, stabilization_term, Assembler,
};
pub use geometry::{
    default_rule, element_geometry, ElementGeometry, QuadPoint, SurfaceGeometry,
    DEGENERACY_THRESHOLD,
};
pub use quadrature::{quadrature, QuadratureRule};
pub use reference::{shape_eval, ReferenceElement, ShapeValues, MAX_LOCAL_NODES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("point ({0}, {1}) lies outside the reference triangle")]
    OutsideReference(f64, f64),
    #[error("no quadrature rule of degree {0} (supported: 1..=6)")]
    UnsupportedQuadrature(usize),
    #[error("element {element} is degenerate (det JᵀJ = {det:e})")]
    Degenerate { element: usize, det: f64 },
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("field {name}: expected {expected} entries, found {found}")]
    FieldLength {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("{0}")]
    InvalidParameter(String),
}
