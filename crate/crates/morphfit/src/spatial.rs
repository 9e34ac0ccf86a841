//! Exact closest-point queries against the target surface.
//!
//! Meshes get a bounding-volume hierarchy over triangles, point clouds a
//! bounding-box tree over points. Both answer nearest-neighbor queries
//! exactly: a node is pruned only when its box is strictly farther than the
//! current best squared distance, so ties are never cut off, and among
//! equidistant primitives the lowest index wins. That makes query results
//! deterministic and independent of tree shape.

use std::collections::HashSet;

use nalgebra::{Point3, Vector3};

use crate::mesh::{Aabb, Mesh, TargetSurface};

/// Result of a single closest-point query.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosestPoint {
    /// The closest point on the target surface.
    pub position: Point3<f64>,
    /// Target normal at the closest point: the face plane normal for
    /// meshes, the stored point normal for clouds. `None` when the target
    /// face is degenerate or the cloud carries no normals.
    pub normal: Option<Vector3<f64>>,
    /// Index of the primitive realizing the minimum (face index for meshes,
    /// point index for clouds). Ties go to the lowest index.
    pub primitive: usize,
    /// Euclidean distance from the query to `position`.
    pub distance: f64,
    /// True when the foot point lies on an open-boundary edge of a mesh
    /// target (an edge with exactly one incident face), including its
    /// endpoints. Always false for point clouds.
    pub on_boundary: bool,
}

/// Which feature of the triangle carries the closest point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TriangleRegion {
    Interior,
    /// Edge between the given pair of local corners (0=a, 1=b, 2=c).
    Edge(u8, u8),
    Vertex(u8),
}

/// Closest point on triangle `(a, b, c)` to `p`, with the Voronoi region
/// that contains the foot point. Standard case analysis on the barycentric
/// signs; exact for non-degenerate triangles and stable for degenerate ones
/// (which collapse to edge or vertex cases).
fn point_triangle_closest(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> (Point3<f64>, TriangleRegion) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, TriangleRegion::Vertex(0));
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, TriangleRegion::Vertex(1));
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let denom = d1 - d3;
        if denom <= 0.0 {
            return (*a, TriangleRegion::Vertex(0));
        }
        let t = d1 / denom;
        return (a + ab * t, TriangleRegion::Edge(0, 1));
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, TriangleRegion::Vertex(2));
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let denom = d2 - d6;
        if denom <= 0.0 {
            return (*a, TriangleRegion::Vertex(0));
        }
        let t = d2 / denom;
        return (a + ac * t, TriangleRegion::Edge(0, 2));
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let denom = (d4 - d3) + (d5 - d6);
        let t = (d4 - d3) / denom;
        return (b + (c - b) * t, TriangleRegion::Edge(1, 2));
    }

    let denom = va + vb + vc;
    if denom <= 0.0 {
        // Fully degenerate triangle; all region tests were inconclusive.
        return (*a, TriangleRegion::Vertex(0));
    }
    let v = vb / denom;
    let w = vc / denom;
    (a + ab * v + ac * w, TriangleRegion::Interior)
}

#[derive(Debug, Clone)]
struct Node {
    aabb: Aabb,
    /// Leaf: `(start, len)` into the ordered primitive list. Inner: children.
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, len: usize },
    Inner { left: usize, right: usize },
}

/// Shared BVH skeleton: primitives are referenced by id and positioned by
/// their centroid during construction.
#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
    order: Vec<usize>,
    root: usize,
}

fn build_tree(
    ids: &mut [usize],
    centroids: &[Point3<f64>],
    bounds_of: &dyn Fn(usize) -> Aabb,
    leaf_size: usize,
    nodes: &mut Vec<Node>,
    offset: usize,
) -> usize {
    let mut aabb = bounds_of(ids[0]);
    for &id in ids.iter().skip(1) {
        aabb = aabb.union(&bounds_of(id));
    }
    if ids.len() <= leaf_size {
        nodes.push(Node {
            aabb,
            kind: NodeKind::Leaf {
                start: offset,
                len: ids.len(),
            },
        });
        return nodes.len() - 1;
    }

    // Split at the median along the longest axis of the centroid bounds.
    let mut cb = Aabb {
        min: centroids[ids[0]],
        max: centroids[ids[0]],
    };
    for &id in ids.iter().skip(1) {
        cb.grow(&centroids[id]);
    }
    let d = cb.max - cb.min;
    let axis = if d.x >= d.y && d.x >= d.z {
        0
    } else if d.y >= d.z {
        1
    } else {
        2
    };
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&x, &y| {
        centroids[x][axis]
            .partial_cmp(&centroids[y][axis])
            .unwrap()
            .then(x.cmp(&y))
    });
    let (lo, hi) = ids.split_at_mut(mid);
    let left = build_tree(lo, centroids, bounds_of, leaf_size, nodes, offset);
    let right = build_tree(hi, centroids, bounds_of, leaf_size, nodes, offset + mid);
    cb = nodes[left].aabb.union(&nodes[right].aabb);
    nodes.push(Node {
        aabb: cb,
        kind: NodeKind::Inner { left, right },
    });
    nodes.len() - 1
}

fn finish_tree(
    count: usize,
    centroids: Vec<Point3<f64>>,
    bounds_of: &dyn Fn(usize) -> Aabb,
    leaf_size: usize,
) -> Tree {
    let mut order: Vec<usize> = (0..count).collect();
    let mut nodes = Vec::new();
    let root = build_tree(&mut order, &centroids, bounds_of, leaf_size, &mut nodes, 0);
    Tree { nodes, order, root }
}

enum IndexKind {
    Mesh {
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
        face_normals: Vec<Option<Vector3<f64>>>,
        boundary_edges: HashSet<(usize, usize)>,
        boundary_vertices: HashSet<usize>,
    },
    Cloud {
        points: Vec<Point3<f64>>,
        normals: Option<Vec<Vector3<f64>>>,
    },
}

/// Acceleration structure over one target surface. Queries are exact (see
/// module docs) and read-only, so an index can be reused across all solver
/// iterations against the same target.
pub struct SpatialIndex {
    tree: Tree,
    kind: IndexKind,
}

/// Build the acceleration structure appropriate for the target: a triangle
/// BVH for meshes, a point tree for clouds.
pub fn build_index(target: &TargetSurface) -> SpatialIndex {
    match target {
        TargetSurface::Mesh(mesh) => SpatialIndex::for_mesh(mesh),
        TargetSurface::PointCloud(cloud) => SpatialIndex {
            tree: {
                let points = cloud.points().to_vec();
                finish_tree(
                    points.len(),
                    points.clone(),
                    &|i| Aabb {
                        min: points[i],
                        max: points[i],
                    },
                    8,
                )
            },
            kind: IndexKind::Cloud {
                points: cloud.points().to_vec(),
                normals: cloud.normals().map(|n| n.to_vec()),
            },
        },
    }
}

impl SpatialIndex {
    fn for_mesh(mesh: &Mesh) -> SpatialIndex {
        let vertices = mesh.vertices().to_vec();
        let faces = mesh.faces().to_vec();
        let centroids: Vec<Point3<f64>> = faces
            .iter()
            .map(|f| {
                Point3::from(
                    (vertices[f[0]].coords + vertices[f[1]].coords + vertices[f[2]].coords) / 3.0,
                )
            })
            .collect();
        let face_bounds = |i: usize| {
            let f = faces[i];
            Aabb::from_points(&[vertices[f[0]], vertices[f[1]], vertices[f[2]]]).unwrap()
        };
        let tree = finish_tree(faces.len(), centroids, &face_bounds, 4);

        let face_normals = faces
            .iter()
            .map(|f| {
                let n = (vertices[f[1]] - vertices[f[0]]).cross(&(vertices[f[2]] - vertices[f[0]]));
                let len = n.norm();
                (len >= 1e-12).then(|| n / len)
            })
            .collect();

        let boundary_edges: HashSet<(usize, usize)> =
            mesh.boundary_edges().into_iter().collect();
        let boundary_vertices = boundary_edges
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .collect();

        SpatialIndex {
            tree,
            kind: IndexKind::Mesh {
                vertices,
                faces,
                face_normals,
                boundary_edges,
                boundary_vertices,
            },
        }
    }

    /// Exact closest point on the target to `query`.
    pub fn closest_point(&self, query: &Point3<f64>) -> ClosestPoint {
        let mut best_d2 = f64::INFINITY;
        let mut best: Option<ClosestPoint> = None;
        let mut best_id = usize::MAX;
        let mut stack = vec![self.tree.root];
        while let Some(ni) = stack.pop() {
            let node = &self.tree.nodes[ni];
            // Strictly-greater pruning: equal-distance boxes stay visitable
            // so the lowest-index tie rule sees every candidate.
            if node.aabb.distance_sq(query) > best_d2 {
                continue;
            }
            match node.kind {
                NodeKind::Inner { left, right } => {
                    let dl = self.tree.nodes[left].aabb.distance_sq(query);
                    let dr = self.tree.nodes[right].aabb.distance_sq(query);
                    // Push the farther child first so the nearer is tried
                    // next; this only affects speed, never the answer.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
                NodeKind::Leaf { start, len } => {
                    for &id in &self.tree.order[start..start + len] {
                        let candidate = self.primitive_closest(id, query);
                        let d2 = candidate.distance * candidate.distance;
                        if d2 < best_d2 || (d2 == best_d2 && id < best_id) {
                            best_d2 = d2;
                            best_id = id;
                            best = Some(candidate);
                        }
                    }
                }
            }
        }
        best.expect("index is never empty: targets require at least one primitive")
    }

    /// Closest points for a batch of queries, in query order.
    pub fn closest_points(&self, queries: &[Point3<f64>]) -> Vec<ClosestPoint> {
        queries.iter().map(|q| self.closest_point(q)).collect()
    }

    /// Number of primitives behind the index.
    pub fn primitive_count(&self) -> usize {
        self.tree.order.len()
    }

    fn primitive_closest(&self, id: usize, query: &Point3<f64>) -> ClosestPoint {
        match &self.kind {
            IndexKind::Mesh {
                vertices,
                faces,
                face_normals,
                boundary_edges,
                boundary_vertices,
            } => {
                let f = faces[id];
                let (position, region) = point_triangle_closest(
                    query,
                    &vertices[f[0]],
                    &vertices[f[1]],
                    &vertices[f[2]],
                );
                let on_boundary = match region {
                    TriangleRegion::Interior => false,
                    TriangleRegion::Edge(u, v) => {
                        let a = f[u as usize];
                        let b = f[v as usize];
                        let key = (a.min(b), a.max(b));
                        boundary_edges.contains(&key)
                    }
                    TriangleRegion::Vertex(u) => boundary_vertices.contains(&f[u as usize]),
                };
                ClosestPoint {
                    position,
                    normal: face_normals[id],
                    primitive: id,
                    distance: (query - position).norm(),
                    on_boundary,
                }
            }
            IndexKind::Cloud { points, normals } => {
                let position = points[id];
                ClosestPoint {
                    position,
                    normal: normals.as_ref().map(|n| n[id]),
                    primitive: id,
                    distance: (query - position).norm(),
                    on_boundary: false,
                }
            }
        }
    }
}
