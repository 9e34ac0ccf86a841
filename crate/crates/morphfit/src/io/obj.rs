//! Wavefront OBJ reading and writing.
//!
//! Only the geometry subset matters here: `v` records (exactly three
//! coordinates) and triangular `f` records. Texture/normal slots inside
//! face references (`f 1/2/3 ...`) are accepted and ignored; every other
//! record type (`vn`, `vt`, `g`, `usemtl`, ...) is skipped, which is the
//! conventional way to stay compatible with exporter chatter.

use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{MorphError, Result};
use crate::mesh::Mesh;

use super::ParsedGeometry;

pub(crate) fn parse(text: &str, source: &str) -> Result<ParsedGeometry> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let fields: Vec<&str> = tokens.collect();
                if fields.len() != 3 {
                    return Err(MorphError::parse(
                        source,
                        line_no,
                        format!("expected 3 vertex coordinates, found {}", fields.len()),
                    ));
                }
                let mut coords = [0.0f64; 3];
                for (k, field) in fields.iter().enumerate() {
                    coords[k] = field.parse().map_err(|_| {
                        MorphError::parse(
                            source,
                            line_no,
                            format!("invalid vertex coordinate '{field}'"),
                        )
                    })?;
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "f" => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(MorphError::parse(
                        source,
                        line_no,
                        format!("non-triangular face at line {line_no}"),
                    ));
                }
                let mut face = [0usize; 3];
                for (k, r) in refs.iter().enumerate() {
                    face[k] = parse_face_ref(r, vertices.len(), source, line_no)?;
                }
                faces.push(face);
            }
            _ => {} // vn, vt, o, g, s, usemtl, mtllib, ...
        }
    }

    Ok(ParsedGeometry {
        vertices,
        normals: None,
        faces,
    })
}

/// Parse one face reference (`7`, `7/2`, `7//3`, `7/2/3`) into a 0-based
/// vertex index.
fn parse_face_ref(token: &str, n_vertices: usize, source: &str, line_no: usize) -> Result<usize> {
    let index_part = token.split('/').next().unwrap_or("");
    let index: i64 = index_part.parse().map_err(|_| {
        MorphError::parse(source, line_no, format!("invalid face index '{token}'"))
    })?;
    if index < 1 {
        return Err(MorphError::parse(
            source,
            line_no,
            format!("face index {index} must be positive (relative indices are not supported)"),
        ));
    }
    let zero_based = (index - 1) as usize;
    if zero_based >= n_vertices {
        return Err(MorphError::parse(
            source,
            line_no,
            format!("face references vertex {index}, but only {n_vertices} vertices were declared"),
        ));
    }
    Ok(zero_based)
}

/// Write a mesh as OBJ with 9-significant-digit coordinates (round-trips
/// through text at better than 1e-6 relative error).
pub fn save(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {:.8e} {:.8e} {:.8e}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    let mut file = std::fs::File::create(path).map_err(|e| MorphError::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| MorphError::io(path, e))?;
    Ok(())
}
