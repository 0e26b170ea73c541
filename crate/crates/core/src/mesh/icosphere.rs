use std::collections::HashMap;

use super::{MeshError, Order, SurfaceMesh};
use crate::Vec3;

/// Subdivided icosahedron projected onto the sphere of the given radius.
///
/// Every subdivision splits each triangle into four; the result has
/// `10·4^s + 2` vertices and `20·4^s` outward-oriented elements.
pub fn build_icosphere(subdivisions: u32, radius: f64) -> Result<SurfaceMesh, MeshError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(MeshError::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if subdivisions > 9 {
        return Err(MeshError::InvalidParameter(format!(
            "{subdivisions} subdivisions exceed the supported maximum of 9"
        )));
    }

    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut points: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();

    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    // convex, so outward means the face normal points away from the origin
    for f in &mut faces {
        let (a, b, c) = (points[f[0]], points[f[1]], points[f[2]]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, points: &mut Vec<Vec3>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                points.push(((points[a] + points[b]) * 0.5).normalize());
                points.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut points);
            let bc = mid(b, c, &mut points);
            let ca = mid(c, a, &mut points);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    let positions: Vec<Vec3> = points.iter().map(|p| p * radius).collect();
    let nv = positions.len();
    let connectivity = faces.into_iter().flatten().collect();
    SurfaceMesh::new(Order::Linear, nv, connectivity, positions)
}
