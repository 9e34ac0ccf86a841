//! Triangle-mesh data model and derived quantities.
//!
//! [`Mesh`] is an indexed triangle mesh that eagerly derives everything the
//! rest of the pipeline keeps asking for: the unique undirected edge set
//! (the stiffness graph of the solver), per-vertex area-weighted normals,
//! and vertex adjacency. A mesh is immutable after construction, so all of
//! these stay consistent and the type is safe to share across threads.

use nalgebra::{Point3, Vector3};

use crate::error::{MorphError, Result};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    /// Bounding box of a point set. Returns `None` for an empty slice.
    pub fn from_points(points: &[Point3<f64>]) -> Option<Aabb> {
        let first = points.first()?;
        let mut min = *first;
        let mut max = *first;
        for p in &points[1..] {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Some(Aabb { min, max })
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    /// Grow to contain `p`.
    pub fn grow(&mut self, p: &Point3<f64>) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    /// Merge with another box.
    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        out.grow(&other.min);
        out.grow(&other.max);
        out
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_sq(&self, p: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = p[k];
            if v < self.min[k] {
                d += (self.min[k] - v) * (self.min[k] - v);
            } else if v > self.max[k] {
                d += (v - self.max[k]) * (v - self.max[k]);
            }
        }
        d
    }
}

/// Per-vertex normals plus the set of vertices whose 1-ring was too
/// degenerate (zero total area, or no incident face at all) to define one.
/// Degenerate entries hold the zero vector.
#[derive(Debug, Clone)]
pub struct VertexNormals {
    pub normals: Vec<Vector3<f64>>,
    pub degenerate: Vec<bool>,
}

/// Area-weighted vertex normals.
///
/// Each face contributes its (un-normalized) edge cross product to its three
/// corners; since the cross product's magnitude is twice the face area this
/// is exactly area weighting. Accumulated vectors shorter than `1e-12` are
/// flagged degenerate instead of being normalized into noise.
pub fn compute_vertex_normals(vertices: &[Point3<f64>], faces: &[[usize; 3]]) -> VertexNormals {
    let mut acc = vec![Vector3::zeros(); vertices.len()];
    for f in faces {
        let [a, b, c] = *f;
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        acc[a] += n;
        acc[b] += n;
        acc[c] += n;
    }
    let mut degenerate = vec![false; vertices.len()];
    for (i, n) in acc.iter_mut().enumerate() {
        let len = n.norm();
        if len < 1e-12 {
            *n = Vector3::zeros();
            degenerate[i] = true;
        } else {
            *n /= len;
        }
    }
    VertexNormals {
        normals: acc,
        degenerate,
    }
}

/// Result of [`validate_manifold`].
///
/// `pass` is false only for structural defects (non-manifold edges or
/// duplicate faces); unreferenced vertices are legal and reported as a
/// warning-level list.
#[derive(Debug, Clone, Default)]
pub struct ManifoldReport {
    pub non_manifold_edges: Vec<(usize, usize)>,
    pub duplicate_faces: Vec<usize>,
    pub unreferenced_vertices: Vec<usize>,
    pub pass: bool,
}

/// An indexed triangle mesh with derived edge set, vertex normals, and
/// adjacency. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    edges: Vec<(usize, usize)>,
    normals: VertexNormals,
    adjacency: Vec<Vec<usize>>,
}

impl Mesh {
    /// Build a mesh, deriving edges, normals and adjacency.
    ///
    /// # Errors
    ///
    /// Rejects empty vertex/face lists, face indices out of range, repeated
    /// indices within a face, and non-finite coordinates.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Mesh> {
        if vertices.is_empty() {
            return Err(MorphError::Invalid("mesh has no vertices".into()));
        }
        if faces.is_empty() {
            return Err(MorphError::Invalid("mesh has no faces".into()));
        }
        for (i, p) in vertices.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(MorphError::Invalid(format!(
                    "vertex {i} has non-finite coordinates"
                )));
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= vertices.len() {
                    return Err(MorphError::Invalid(format!(
                        "face {fi} references vertex {v}, but the mesh has only {} vertices",
                        vertices.len()
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MorphError::Invalid(format!(
                    "face {fi} is degenerate (repeated vertex index)"
                )));
            }
        }

        let edges = derive_edges(&faces);
        let normals = compute_vertex_normals(&vertices, &faces);
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        // Edge derivation sorts, so each adjacency list is already ascending.

        Ok(Mesh {
            vertices,
            faces,
            edges,
            normals,
            adjacency,
        })
    }

    /// A copy of this mesh with new vertex positions and identical
    /// connectivity. Normals are recomputed; edges and adjacency are reused.
    pub fn with_positions(&self, positions: Vec<Point3<f64>>) -> Result<Mesh> {
        if positions.len() != self.vertices.len() {
            return Err(MorphError::Invalid(format!(
                "position count {} does not match vertex count {}",
                positions.len(),
                self.vertices.len()
            )));
        }
        let normals = compute_vertex_normals(&positions, &self.faces);
        Ok(Mesh {
            vertices: positions,
            faces: self.faces.clone(),
            edges: self.edges.clone(),
            normals,
            adjacency: self.adjacency.clone(),
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Unique undirected edges as `(low, high)` pairs in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn vertex_normals(&self) -> &[Vector3<f64>] {
        &self.normals.normals
    }

    /// True if vertex `i` had no usable normal (zero-area or empty 1-ring).
    pub fn normal_is_degenerate(&self, i: usize) -> bool {
        self.normals.degenerate[i]
    }

    /// Neighbors of each vertex in the edge graph, ascending.
    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices).expect("mesh is never empty")
    }

    /// Edges with exactly one incident face (scan borders).
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        edge_face_counts(&self.edges, &self.faces)
            .into_iter()
            .zip(self.edges.iter())
            .filter(|(count, _)| *count == 1)
            .map(|(_, e)| *e)
            .collect()
    }
}

fn derive_edges(faces: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = faces
        .iter()
        .flat_map(|f| {
            [(f[0], f[1]), (f[1], f[2]), (f[0], f[2])]
                .into_iter()
                .map(|(a, b)| (a.min(b), a.max(b)))
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

fn edge_face_counts(edges: &[(usize, usize)], faces: &[[usize; 3]]) -> Vec<usize> {
    let mut counts = vec![0usize; edges.len()];
    for f in faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[0], f[2])] {
            let key = (a.min(b), a.max(b));
            let idx = edges.binary_search(&key).expect("edge derived from faces");
            counts[idx] += 1;
        }
    }
    counts
}

/// Structural validation: non-manifold edges (more than two incident faces),
/// duplicate faces (same vertex set, any orientation), and unreferenced
/// vertices. The first two fail the report; the last is only a warning.
pub fn validate_manifold(mesh: &Mesh) -> ManifoldReport {
    let counts = edge_face_counts(mesh.edges(), mesh.faces());
    let non_manifold_edges: Vec<(usize, usize)> = counts
        .iter()
        .zip(mesh.edges().iter())
        .filter(|(c, _)| **c > 2)
        .map(|(_, e)| *e)
        .collect();

    let mut seen: Vec<([usize; 3], usize)> = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut k = *f;
            k.sort_unstable();
            (k, i)
        })
        .collect();
    seen.sort_unstable();
    let mut duplicate_faces: Vec<usize> = seen
        .windows(2)
        .filter(|w| w[0].0 == w[1].0)
        .map(|w| w[1].1)
        .collect();
    duplicate_faces.sort_unstable();

    let mut referenced = vec![false; mesh.vertex_count()];
    for f in mesh.faces() {
        for &v in f {
            referenced[v] = true;
        }
    }
    let unreferenced_vertices: Vec<usize> = referenced
        .iter()
        .enumerate()
        .filter(|(_, r)| !**r)
        .map(|(i, _)| i)
        .collect();

    let pass = non_manifold_edges.is_empty() && duplicate_faces.is_empty();
    ManifoldReport {
        non_manifold_edges,
        duplicate_faces,
        unreferenced_vertices,
        pass,
    }
}

/// A raw point set, optionally with unit normals, usable as a registration
/// target when no mesh connectivity is available.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    /// # Errors
    ///
    /// Rejects empty clouds, normal lists of mismatched length, and normals
    /// that are not unit length (±1e-6).
    pub fn new(points: Vec<Point3<f64>>, normals: Option<Vec<Vector3<f64>>>) -> Result<PointCloud> {
        if points.is_empty() {
            return Err(MorphError::Invalid("empty target".into()));
        }
        if let Some(ns) = &normals {
            if ns.len() != points.len() {
                return Err(MorphError::Invalid(format!(
                    "point cloud has {} points but {} normals",
                    points.len(),
                    ns.len()
                )));
            }
            for (i, n) in ns.iter().enumerate() {
                if (n.norm() - 1.0).abs() > 1e-6 {
                    return Err(MorphError::Invalid(format!(
                        "point cloud normal {i} is not unit length"
                    )));
                }
            }
        }
        Ok(PointCloud { points, normals })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The surface a template is registered against: a triangle mesh or a bare
/// point cloud. Meshes answer closest-point queries on their triangles;
/// clouds on their points.
#[derive(Debug, Clone)]
pub enum TargetSurface {
    Mesh(Mesh),
    PointCloud(PointCloud),
}

impl TargetSurface {
    /// Number of primitives (triangles or points).
    pub fn primitive_count(&self) -> usize {
        match self {
            TargetSurface::Mesh(m) => m.faces().len(),
            TargetSurface::PointCloud(c) => c.len(),
        }
    }

    pub fn aabb(&self) -> Aabb {
        match self {
            TargetSurface::Mesh(m) => m.aabb(),
            TargetSurface::PointCloud(c) => {
                Aabb::from_points(c.points()).expect("cloud is never empty")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn triangle() -> Mesh {
        Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_has_three_edges() {
        let m = triangle();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.edge_count(), 3);
        assert_eq!(m.edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn shared_edge_stored_once() {
        // Two triangles sharing edge (1,2): 5 unique edges.
        let m = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        assert_eq!(m.edge_count(), 5);
    }

    #[test]
    fn edge_count_matches_brute_force_pair_scan() {
        let m = tetrahedron();
        let n = m.vertex_count();
        let mut brute = 0;
        for a in 0..n {
            for b in (a + 1)..n {
                let touching = m
                    .faces()
                    .iter()
                    .any(|f| f.contains(&a) && f.contains(&b));
                if touching {
                    brute += 1;
                }
            }
        }
        assert_eq!(m.edge_count(), brute);
    }

    #[test]
    fn face_index_out_of_range_is_rejected() {
        let r = Mesh::new(vec![Point3::origin(); 3], vec![[0, 1, 7]]);
        assert!(r.is_err());
    }

    #[test]
    fn repeated_index_within_face_is_rejected() {
        let r = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 1]],
        );
        match r {
            Err(MorphError::Invalid(msg)) => assert!(msg.contains("degenerate")),
            _ => panic!("expected validation error"),
        }
    }

    #[test]
    fn flat_square_normals_point_up() {
        let m = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        for i in 0..4 {
            assert_relative_eq!(
                m.vertex_normals()[i],
                Vector3::new(0.0, 0.0, 1.0),
                epsilon = 1e-12
            );
            assert!(!m.normal_is_degenerate(i));
        }
    }

    fn tetrahedron() -> Mesh {
        // Regular tetrahedron on alternating cube corners, outward faces.
        let v = vec![
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(1.0, -1.0, -1.0),
            Point3::new(-1.0, 1.0, -1.0),
            Point3::new(-1.0, -1.0, 1.0),
        ];
        Mesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap()
    }

    #[test]
    fn tetrahedron_normals_are_radial() {
        let m = tetrahedron();
        // Centroid is the origin, so each vertex normal must align with the
        // vertex direction itself by symmetry.
        for (i, p) in m.vertices().iter().enumerate() {
            let radial = p.coords.normalize();
            assert_relative_eq!(m.vertex_normals()[i], radial, epsilon = 1e-12);
        }
    }

    #[test]
    fn isolated_vertex_gets_degenerate_zero_normal() {
        let m = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(5.0, 5.0, 5.0), // never referenced
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(m.normal_is_degenerate(3));
        assert_eq!(m.vertex_normals()[3], Vector3::zeros());
    }

    #[test]
    fn normals_invariant_under_face_permutation() {
        let m1 = tetrahedron();
        let mut faces = m1.faces().to_vec();
        faces.reverse();
        let m2 = Mesh::new(m1.vertices().to_vec(), faces).unwrap();
        for i in 0..m1.vertex_count() {
            assert_relative_eq!(
                m1.vertex_normals()[i],
                m2.vertex_normals()[i],
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn closed_tetrahedron_passes_validation() {
        let report = validate_manifold(&tetrahedron());
        assert!(report.pass);
        assert!(report.non_manifold_edges.is_empty());
        assert!(report.duplicate_faces.is_empty());
        assert!(report.unreferenced_vertices.is_empty());
    }

    #[test]
    fn three_faces_on_one_edge_fail_validation() {
        let m = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, -1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]],
        )
        .unwrap();
        let report = validate_manifold(&m);
        assert!(!report.pass);
        assert_eq!(report.non_manifold_edges, vec![(0, 1)]);
    }

    #[test]
    fn unreferenced_vertex_is_warning_not_failure() {
        let m = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(9.0, 9.0, 9.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let report = validate_manifold(&m);
        assert!(report.pass);
        assert_eq!(report.unreferenced_vertices, vec![3]);
    }

    #[test]
    fn duplicate_face_detected_regardless_of_orientation() {
        let m = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [2, 1, 0]],
        )
        .unwrap();
        let report = validate_manifold(&m);
        assert!(!report.pass);
        assert_eq!(report.duplicate_faces, vec![1]);
    }

    #[test]
    fn boundary_edges_of_open_strip() {
        let m = triangle();
        assert_eq!(m.boundary_edges().len(), 3);
    }

    #[test]
    fn empty_cloud_is_rejected() {
        match PointCloud::new(vec![], None) {
            Err(MorphError::Invalid(msg)) => assert_eq!(msg, "empty target"),
            _ => panic!("expected empty-target error"),
        }
    }

    #[test]
    fn cloud_normals_must_be_unit() {
        let r = PointCloud::new(
            vec![Point3::origin()],
            Some(vec![Vector3::new(0.0, 0.0, 2.0)]),
        );
        assert!(r.is_err());
    }

    #[test]
    fn aabb_diagonal() {
        let b = Aabb::from_points(&[Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 4.0, 0.0)])
            .unwrap();
        assert_relative_eq!(b.diagonal(), 5.0);
        assert_eq!(b.distance_sq(&Point3::new(1.0, 1.0, 0.0)), 0.0);
        assert_relative_eq!(b.distance_sq(&Point3::new(4.0, 4.0, 0.0)), 1.0);
    }
}
