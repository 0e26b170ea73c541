use std::collections::HashMap;

use super::{
    project_point, ImplicitSurface, MeshError, Order, SurfaceMesh, DEFAULT_PROJECTION_ITERATIONS,
};

/// Adds one node per edge at the edge midpoint, projected onto `surf` when
/// given, so the quadratic surface interpolates the exact one at every node.
///
/// New nodes are numbered after the vertices in first-seen edge order.
pub fn elevate_to_quadratic(
    mesh: &SurfaceMesh,
    surf: Option<&dyn ImplicitSurface>,
    tol: f64,
) -> Result<SurfaceMesh, MeshError> {
    if mesh.order() != Order::Linear {
        return Err(MeshError::WrongOrder {
            expected: 1,
            found: mesh.order().degree(),
        });
    }
    let mut positions = mesh.reference_positions().to_vec();
    let mut edge_node: HashMap<(usize, usize), usize> = HashMap::new();
    let mut connectivity = Vec::with_capacity(mesh.num_elements() * 6);

    for el in mesh.elements() {
        let mut mids = [0usize; 3];
        // opposite vertex 0, 1, 2
        for (slot, (a, b)) in [(el[1], el[2]), (el[2], el[0]), (el[0], el[1])]
            .into_iter()
            .enumerate()
        {
            let key = (a.min(b), a.max(b));
            let idx = match edge_node.get(&key) {
                Some(&i) => i,
                None => {
                    let mut p = (positions[a] + positions[b]) * 0.5;
                    if let Some(s) = surf {
                        let node = positions.len();
                        p = project_point(s, p, tol, DEFAULT_PROJECTION_ITERATIONS)
                            .map_err(|residual| MeshError::ProjectionFailed { node, residual })?;
                    }
                    positions.push(p);
                    edge_node.insert(key, positions.len() - 1);
                    positions.len() - 1
                }
            };
            mids[slot] = idx;
        }
        connectivity.extend_from_slice(&[el[0], el[1], el[2], mids[0], mids[1], mids[2]]);
    }

    Ok(SurfaceMesh::new_unchecked(
        Order::Quadratic,
        mesh.num_vertices(),
        connectivity,
        positions,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_icosphere, Sphere};

    #[test]
    fn icosahedron_gains_one_node_per_edge() {
        let m = build_icosphere(0, 1.0).unwrap();
        let q = elevate_to_quadratic(&m, None, 1e-12).unwrap();
        assert_eq!(q.num_nodes(), 42);
        assert_eq!(q.order(), Order::Quadratic);
        q.validate().unwrap();
        for el in q.elements() {
            let p = q.reference_positions();
            let mid = (p[el[1]] + p[el[2]]) * 0.5;
            assert_eq!(p[el[3]], mid);
            assert_eq!(p[el[5]], (p[el[0]] + p[el[1]]) * 0.5);
        }
    }

    #[test]
    fn projected_midnodes_lie_on_sphere() {
        let m = build_icosphere(0, 1.0).unwrap();
        let s = Sphere::new(1.0);
        let q = elevate_to_quadratic(&m, Some(&s), 1e-13).unwrap();
        for p in q.reference_positions() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_mesh_cannot_be_elevated() {
        let m = build_icosphere(0, 1.0).unwrap();
        let q = elevate_to_quadratic(&m, None, 1e-12).unwrap();
        assert!(matches!(
            elevate_to_quadratic(&q, None, 1e-12),
            Err(MeshError::WrongOrder { .. })
        ));
    }

    #[test]
    fn flipping_keeps_quadratic_mesh_valid() {
        let m = build_icosphere(1, 1.0).unwrap();
        let q = elevate_to_quadratic(&m, None, 1e-12).unwrap();
        let f = q.flipped();
        f.validate().unwrap();
        assert!(f.signed_volume() < 0.0);
    }
}
