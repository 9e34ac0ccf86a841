//! Mesh and point-cloud file I/O.
//!
//! Two formats are supported: Wavefront OBJ (`v`/`f` records) and PLY in
//! both ascii and binary little-endian encodings. Vertex indices are 0-based
//! everywhere inside this crate; OBJ's 1-based indices are converted at the
//! parse/write boundary. Non-triangular faces are rejected outright — the
//! stiffness graph is defined on the authored edge set, so silent
//! triangulation would change the energy being minimized.

pub mod obj;
pub mod ply;

use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{MorphError, Result};
use crate::mesh::{Mesh, PointCloud, TargetSurface};

pub use ply::PlyEncoding;

/// Input file format, normally inferred from the extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Obj,
    Ply,
}

/// Infer the format from a path's extension (`.obj` / `.ply`, any case).
pub fn detect_format(path: &Path) -> Result<FileFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("obj") => Ok(FileFormat::Obj),
        Some("ply") => Ok(FileFormat::Ply),
        _ => Err(MorphError::Invalid(format!(
            "cannot infer mesh format from extension of '{}' (expected .obj or .ply)",
            path.display()
        ))),
    }
}

/// Geometry as read from disk, before it is classified as mesh or cloud.
#[derive(Debug, Clone)]
pub(crate) struct ParsedGeometry {
    pub vertices: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub faces: Vec<[usize; 3]>,
}

/// Load a triangle mesh. Vertex order is preserved from the file.
///
/// # Errors
///
/// Parse errors carry the 1-based line number (or element index for binary
/// PLY). Files without faces are rejected here; use [`load_target`] for
/// point clouds.
pub fn load_mesh(path: &Path, format: FileFormat) -> Result<Mesh> {
    let geo = parse_file(path, format)?;
    Mesh::new(geo.vertices, geo.faces)
}

/// Load a registration target: a file with faces becomes a mesh, a file
/// with only vertices becomes a point cloud (keeping per-point normals if
/// the file carried any).
pub fn load_target(path: &Path, format: FileFormat) -> Result<TargetSurface> {
    let geo = parse_file(path, format)?;
    if geo.faces.is_empty() {
        Ok(TargetSurface::PointCloud(PointCloud::new(
            geo.vertices,
            geo.normals,
        )?))
    } else {
        Ok(TargetSurface::Mesh(Mesh::new(geo.vertices, geo.faces)?))
    }
}

fn parse_file(path: &Path, format: FileFormat) -> Result<ParsedGeometry> {
    match format {
        FileFormat::Obj => {
            let text =
                std::fs::read_to_string(path).map_err(|e| MorphError::io(path, e))?;
            obj::parse(&text, &path.display().to_string())
        }
        FileFormat::Ply => {
            let bytes = std::fs::read(path).map_err(|e| MorphError::io(path, e))?;
            ply::parse(&bytes, &path.display().to_string())
        }
    }
}
