//! Closed triangulated surfaces with linear or quadratic Lagrange nodes.

mod elevate;
mod icosphere;
mod implicit;
pub mod io;

use std::collections::HashMap;

use thiserror::Error;

use crate::Vec3;

pub use elevate::elevate_to_quadratic;
pub use icosphere::build_icosphere;
pub use implicit::{
    build_dumbbell, build_sphere, dumbbell_half_height, project_point, project_to_implicit,
    Dumbbell, ImplicitSurface, Sphere, DEFAULT_PROJECTION_ITERATIONS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("element {element} references node {node} but the mesh has {num_nodes} nodes")]
    NodeOutOfRange {
        element: usize,
        node: usize,
        num_nodes: usize,
    },
    #[error("node {0} is not referenced by any element")]
    OrphanNode(usize),
    #[error("edge ({0}, {1}) is shared by {2} elements, expected 2")]
    OpenEdge(usize, usize, usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by both neighbouring elements")]
    InconsistentOrientation(usize, usize),
    #[error("edge node mismatch on edge ({0}, {1})")]
    EdgeNodeMismatch(usize, usize),
    #[error("projection of node {node} did not converge (|d| = {residual:e})")]
    ProjectionFailed { node: usize, residual: f64 },
    #[error("operation requires a mesh of order {expected}, found {found}")]
    WrongOrder { expected: usize, found: usize },
    #[error("expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
}

/// Polynomial degree of the Lagrange basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    Linear,
    Quadratic,
}

impl Order {
    pub fn degree(self) -> usize {
        match self {
            Order::Linear => 1,
            Order::Quadratic => 2,
        }
    }

    pub fn nodes_per_element(self) -> usize {
        match self {
            Order::Linear => 3,
            Order::Quadratic => 6,
        }
    }

    pub fn from_degree(k: usize) -> Option<Order> {
        match k {
            1 => Some(Order::Linear),
            2 => Some(Order::Quadratic),
            _ => None,
        }
    }
}

/// A closed, consistently oriented triangulated surface.
///
/// Quadratic elements list their three vertices first, followed by the
/// midnodes of the edges opposite vertex 0, 1 and 2, i.e. edges (1,2),
/// (2,0) and (0,1). Vertices occupy node indices `0..num_vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    order: Order,
    num_vertices: usize,
    connectivity: Vec<usize>,
    positions: Vec<Vec3>,
}

impl SurfaceMesh {
    /// Builds a mesh and audits the closedness and orientation invariants.
    pub fn new(
        order: Order,
        num_vertices: usize,
        connectivity: Vec<usize>,
        positions: Vec<Vec3>,
    ) -> Result<Self, MeshError> {
        let mesh = SurfaceMesh {
            order,
            num_vertices,
            connectivity,
            positions,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub(crate) fn new_unchecked(
        order: Order,
        num_vertices: usize,
        connectivity: Vec<usize>,
        positions: Vec<Vec3>,
    ) -> Self {
        SurfaceMesh {
            order,
            num_vertices,
            connectivity,
            positions,
        }
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn num_elements(&self) -> usize {
        self.connectivity.len() / self.order.nodes_per_element()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.order.nodes_per_element();
        &self.connectivity[e * k..(e + 1) * k]
    }

    pub fn elements(&self) -> std::slice::ChunksExact<'_, usize> {
        self.connectivity
            .chunks_exact(self.order.nodes_per_element())
    }

    /// Initial node positions `x⁰`.
    pub fn reference_positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Initial nodal vector in component-major layout `(x₁…x_N, y₁…y_N, z₁…z_N)`.
    pub fn nodal_vector(&self) -> Vec<f64> {
        to_nodal_vector(&self.positions)
    }

    /// Same connectivity, new reference positions.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self, MeshError> {
        if positions.len() != self.num_nodes() {
            return Err(MeshError::DimensionMismatch {
                expected: self.num_nodes(),
                found: positions.len(),
            });
        }
        Ok(SurfaceMesh {
            positions,
            ..self.clone()
        })
    }

    /// Undirected vertex edges in first-seen order, each with its two
    /// adjacent elements.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut edges = Vec::new();
        for el in self.elements() {
            for (a, b) in [(el[0], el[1]), (el[1], el[2]), (el[2], el[0])] {
                let key = (a.min(b), a.max(b));
                seen.entry(key).or_insert_with(|| {
                    edges.push(key);
                });
            }
        }
        edges
    }

    /// Audits index ranges, node coverage, closedness and orientation.
    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.num_nodes();
        let mut used = vec![false; n];
        for (e, el) in self.elements().enumerate() {
            for &node in el {
                if node >= n {
                    return Err(MeshError::NodeOutOfRange {
                        element: e,
                        node,
                        num_nodes: n,
                    });
                }
                used[node] = true;
            }
        }
        if let Some(orphan) = used.iter().position(|u| !u) {
            return Err(MeshError::OrphanNode(orphan));
        }

        // directed edge -> (count, midnode)
        let mut directed: HashMap<(usize, usize), (usize, Option<usize>)> = HashMap::new();
        for el in self.elements() {
            let mids: [Option<usize>; 3] = match self.order {
                Order::Linear => [None; 3],
                Order::Quadratic => [Some(el[5]), Some(el[3]), Some(el[4])],
            };
            for (i, (a, b)) in [(el[0], el[1]), (el[1], el[2]), (el[2], el[0])]
                .into_iter()
                .enumerate()
            {
                let entry = directed.entry((a, b)).or_insert((0, mids[i]));
                entry.0 += 1;
                if entry.0 > 1 {
                    return Err(MeshError::InconsistentOrientation(a.min(b), a.max(b)));
                }
            }
        }
        for (&(a, b), &(_, mid)) in &directed {
            match directed.get(&(b, a)) {
                None => return Err(MeshError::OpenEdge(a.min(b), a.max(b), 1)),
                Some(&(_, other)) => {
                    if other != mid {
                        return Err(MeshError::EdgeNodeMismatch(a.min(b), a.max(b)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Signed enclosed volume, positive for outward-oriented elements.
    pub fn signed_volume(&self) -> f64 {
        self.elements()
            .map(|el| {
                let (a, b, c) = (
                    self.positions[el[0]],
                    self.positions[el[1]],
                    self.positions[el[2]],
                );
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Reverses every element, keeping midnodes attached to their edges.
    pub fn flipped(&self) -> SurfaceMesh {
        let k = self.order.nodes_per_element();
        let mut conn = self.connectivity.clone();
        for el in conn.chunks_exact_mut(k) {
            el.swap(1, 2);
            if k == 6 {
                // opposite-edge midnodes of vertices 1 and 2 trade places
                el.swap(4, 5);
            }
        }
        SurfaceMesh {
            connectivity: conn,
            ..self.clone()
        }
    }
}

/// Node-major positions to component-major nodal vector.
pub fn to_nodal_vector(points: &[Vec3]) -> Vec<f64> {
    let n = points.len();
    let mut x = vec![0.0; 3 * n];
    for (j, p) in points.iter().enumerate() {
        x[j] = p.x;
        x[n + j] = p.y;
        x[2 * n + j] = p.z;
    }
    x
}

/// Node `j` of a component-major vector with `n` nodes.
#[inline]
pub fn node(x: &[f64], n: usize, j: usize) -> Vec3 {
    Vec3::new(x[j], x[n + j], x[2 * n + j])
}

pub fn to_points(x: &[f64]) -> Vec<Vec3> {
    let n = x.len() / 3;
    (0..n).map(|j| node(x, n, j)).collect()
}

/// Largest vertex-to-vertex distance over all elements of the surface
/// with nodal vector `x`.
pub fn mesh_width(mesh: &SurfaceMesh, x: &[f64]) -> Result<f64, MeshError> {
    let n = mesh.num_nodes();
    if x.len() != 3 * n {
        return Err(MeshError::DimensionMismatch {
            expected: 3 * n,
            found: x.len(),
        });
    }
    let mut h: f64 = 0.0;
    for el in mesh.elements() {
        let p = [node(x, n, el[0]), node(x, n, el[1]), node(x, n, el[2])];
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            h = h.max((p[a] - p[b]).norm());
        }
    }
    Ok(h)
}
