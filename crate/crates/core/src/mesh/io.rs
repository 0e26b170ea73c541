//! Legacy ASCII VTK and Wavefront OBJ output, OBJ input.
//!
//! Quadratic elements are written as four flat sub-triangles over their six
//! nodes, so every node appears as a point of the exported surface.

use std::io::{self, Write};

use thiserror::Error;

use super::{node, MeshError, Order, SurfaceMesh};
use crate::Vec3;

/// Flat triangles covering the mesh, oriented like their parent element.
pub fn flat_triangles(mesh: &SurfaceMesh) -> Vec<[usize; 3]> {
    let mut tris = Vec::with_capacity(mesh.num_elements() * 4);
    for el in mesh.elements() {
        match mesh.order() {
            Order::Linear => tris.push([el[0], el[1], el[2]]),
            Order::Quadratic => {
                let (m12, m20, m01) = (el[3], el[4], el[5]);
                tris.push([el[0], m01, m20]);
                tris.push([m01, el[1], m12]);
                tris.push([m20, m12, el[2]]);
                tris.push([m01, m12, m20]);
            }
        }
    }
    tris
}

/// A nodal field attached to VTK point data.
#[derive(Debug, Clone, Copy)]
pub enum PointField<'a> {
    Scalar(&'a str, &'a [f64]),
    /// Component-major 3-vector field of length `3N`.
    Vector(&'a str, &'a [f64]),
}

/// Writes a legacy VTK 3.0 POLYDATA file of the surface with nodal vector `x`.
pub fn write_vtk<W: Write>(
    out: &mut W,
    title: &str,
    mesh: &SurfaceMesh,
    x: &[f64],
    fields: &[PointField<'_>],
) -> io::Result<()> {
    let n = mesh.num_nodes();
    if x.len() != 3 * n {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("expected {} coordinates, got {}", 3 * n, x.len()),
        ));
    }
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET POLYDATA")?;
    writeln!(out, "POINTS {n} double")?;
    for j in 0..n {
        let p = node(x, n, j);
        writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
    }
    let tris = flat_triangles(mesh);
    writeln!(out, "POLYGONS {} {}", tris.len(), 4 * tris.len())?;
    for t in &tris {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    if fields.is_empty() {
        return Ok(());
    }
    writeln!(out, "POINT_DATA {n}")?;
    for field in fields {
        match *field {
            PointField::Scalar(name, values) => {
                check_len(name, values.len(), n)?;
                writeln!(out, "SCALARS {name} double 1")?;
                writeln!(out, "LOOKUP_TABLE default")?;
                for v in values {
                    writeln!(out, "{v}")?;
                }
            }
            PointField::Vector(name, values) => {
                check_len(name, values.len(), 3 * n)?;
                writeln!(out, "VECTORS {name} double")?;
                for j in 0..n {
                    let v = node(values, n, j);
                    writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
                }
            }
        }
    }
    Ok(())
}

fn check_len(name: &str, found: usize, expected: usize) -> io::Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("field {name}: expected {expected} values, got {found}"),
        ))
    }
}

/// Writes all nodes as OBJ vertices and the flat triangles as faces.
pub fn write_obj<W: Write>(out: &mut W, mesh: &SurfaceMesh, x: &[f64]) -> io::Result<()> {
    let n = mesh.num_nodes();
    if x.len() != 3 * n {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("expected {} coordinates, got {}", 3 * n, x.len()),
        ));
    }
    for j in 0..n {
        let p = node(x, n, j);
        writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for t in flat_triangles(mesh) {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NonTriangularFace { line: usize, count: usize },
    #[error("line {line}: vertex index {index} out of range (have {count} vertices)")]
    IndexOutOfRange {
        line: usize,
        index: i64,
        count: usize,
    },
    #[error("no faces")]
    Empty,
    #[error("invalid surface: {0}")]
    Mesh(#[from] MeshError),
}

/// Parses an OBJ file with triangular faces into a linear surface mesh.
///
/// Texture and normal indices (`v/vt/vn`) and negative relative indices are
/// accepted; all other statements are ignored. The result is audited for
/// closedness and orientation and flipped if it encloses negative volume.
pub fn read_obj(text: &str) -> Result<SurfaceMesh, ObjError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<usize> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let tok = tokens.next().ok_or_else(|| ObjError::Syntax {
                        line,
                        message: "vertex needs three coordinates".into(),
                    })?;
                    let v: f64 = tok.parse().map_err(|_| ObjError::Syntax {
                        line,
                        message: format!("invalid coordinate {tok:?}"),
                    })?;
                    if !v.is_finite() {
                        return Err(ObjError::Syntax {
                            line,
                            message: format!("non-finite coordinate {tok:?}"),
                        });
                    }
                    *slot = v;
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(ObjError::NonTriangularFace {
                        line,
                        count: refs.len(),
                    });
                }
                for r in refs {
                    let idx_tok = r.split('/').next().unwrap_or("");
                    let index: i64 = idx_tok.parse().map_err(|_| ObjError::Syntax {
                        line,
                        message: format!("invalid vertex reference {r:?}"),
                    })?;
                    let count = vertices.len();
                    let resolved = if index > 0 {
                        usize::try_from(index - 1).ok().filter(|&k| k < count)
                    } else if index < 0 {
                        usize::try_from(index.unsigned_abs())
                            .ok()
                            .and_then(|back| count.checked_sub(back))
                    } else {
                        None
                    };
                    faces.push(resolved.ok_or(ObjError::IndexOutOfRange { line, index, count })?);
                }
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(ObjError::Empty);
    }
    for tri in faces.chunks_exact(3) {
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(ObjError::Syntax {
                line: 0,
                message: format!("degenerate face {tri:?}"),
            });
        }
    }
    let nv = vertices.len();
    let mesh = SurfaceMesh::new(Order::Linear, nv, faces, vertices)?;
    Ok(if mesh.signed_volume() < 0.0 {
        mesh.flipped()
    } else {
        mesh
    })
}
