//! Landmark correspondences: template vertex index to target position.
//!
//! The mapping must be injective on vertex indices. File format is a
//! one-line header `morphfit-landmarks v1` followed by
//! `<vertex_index> <x> <y> <z>` lines; `#` starts a comment.

use std::path::Path;

use nalgebra::Point3;

use crate::error::{MorphError, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub vertex: usize,
    pub target: Point3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    entries: Vec<Landmark>,
}

pub const LANDMARKS_HEADER: &str = "morphfit-landmarks v1";

impl LandmarkSet {
    /// Build a set from entries, rejecting repeated vertex indices.
    pub fn new(entries: Vec<Landmark>) -> Result<LandmarkSet> {
        let mut seen = std::collections::HashSet::new();
        for lm in &entries {
            if !seen.insert(lm.vertex) {
                return Err(MorphError::Invalid(format!(
                    "duplicate landmark for vertex {}",
                    lm.vertex
                )));
            }
            if !lm.target.coords.iter().all(|c| c.is_finite()) {
                return Err(MorphError::Invalid(format!(
                    "landmark for vertex {} has a non-finite target",
                    lm.vertex
                )));
            }
        }
        Ok(LandmarkSet { entries })
    }

    pub fn load(path: &Path) -> Result<LandmarkSet> {
        let text = std::fs::read_to_string(path).map_err(|e| MorphError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<LandmarkSet> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == LANDMARKS_HEADER => {}
            _ => {
                return Err(MorphError::parse(
                    source,
                    1,
                    format!("expected '{LANDMARKS_HEADER}' header"),
                ))
            }
        }

        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in lines {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(MorphError::parse(
                    source,
                    line_no,
                    format!(
                        "expected vertex index and 3 coordinates, found {} fields",
                        fields.len()
                    ),
                ));
            }
            let vertex: usize = fields[0].parse().map_err(|_| {
                MorphError::parse(
                    source,
                    line_no,
                    format!("invalid vertex index '{}'", fields[0]),
                )
            })?;
            if !seen.insert(vertex) {
                return Err(MorphError::parse(
                    source,
                    line_no,
                    format!("duplicate landmark for vertex {vertex}"),
                ));
            }
            let mut coords = [0.0f64; 3];
            for (k, field) in fields[1..].iter().enumerate() {
                coords[k] = field.parse().map_err(|_| {
                    MorphError::parse(
                        source,
                        line_no,
                        format!("invalid coordinate '{field}'"),
                    )
                })?;
            }
            entries.push(Landmark {
                vertex,
                target: Point3::new(coords[0], coords[1], coords[2]),
            });
        }
        LandmarkSet::new(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from(LANDMARKS_HEADER);
        out.push('\n');
        for lm in &self.entries {
            out.push_str(&format!(
                "{} {} {} {}\n",
                lm.vertex, lm.target.x, lm.target.y, lm.target.z
            ));
        }
        std::fs::write(path, out).map_err(|e| MorphError::io(path, e))
    }

    /// Check every referenced vertex exists on the template.
    pub fn validate_for(&self, mesh: &Mesh) -> Result<()> {
        for lm in &self.entries {
            if lm.vertex >= mesh.vertex_count() {
                return Err(MorphError::Invalid(format!(
                    "landmark references vertex {}, but the template has {} vertices",
                    lm.vertex,
                    mesh.vertex_count()
                )));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[Landmark] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn target_of(&self, vertex: usize) -> Option<Point3<f64>> {
        self.entries
            .iter()
            .find(|lm| lm.vertex == vertex)
            .map(|lm| lm.target)
    }
}
