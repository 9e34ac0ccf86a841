//! Landmark-driven template partitioning.
//!
//! A partition spec names landmarks, strings them into chains, and seeds one
//! vertex per part. Chains are traced as shortest edge-graph paths between
//! consecutive landmarks; the traced polylines act as walls for a flood fill
//! that labels every vertex with a part id. Each vertex then gets its
//! Euclidean distance to the nearest boundary polyline bordering its own
//! part, together with the part on the other side — the two quantities the
//! seam-blending step consumes.
//!
//! Everything here is deterministic: shortest paths break ties by vertex
//! index, flood fill scans in index order, and distance ties go to the
//! lower polyline index.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{MorphError, Result};
use crate::mesh::Mesh;

pub const PARTITION_HEADER: &str = "morphfit-partition v1";
pub const PARTITION_MAP_HEADER: &str = "morphfit-partitionmap v1";

/// One boundary chain in a spec: ordered landmark labels, open or closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSpec {
    pub labels: Vec<String>,
    pub closed: bool,
}

/// Parsed partition strategy: named landmark vertices, boundary chains over
/// those names, and one seed vertex per part (part ids follow seed order,
/// starting at 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    parts: usize,
    labels: Vec<(String, usize)>,
    chains: Vec<ChainSpec>,
    seeds: Vec<usize>,
}

impl PartitionSpec {
    pub fn load(path: &Path) -> Result<PartitionSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| MorphError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<PartitionSpec> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == PARTITION_HEADER => {}
            _ => {
                return Err(MorphError::parse(
                    source,
                    1,
                    format!("expected '{PARTITION_HEADER}' header"),
                ))
            }
        }

        let mut parts: Option<usize> = None;
        let mut labels: Vec<(String, usize)> = Vec::new();
        let mut chains: Vec<ChainSpec> = Vec::new();
        let mut seeds: Vec<usize> = Vec::new();

        for (i, raw) in lines {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "parts" => {
                    if parts.is_some() {
                        return Err(MorphError::parse(source, line_no, "'parts' declared twice"));
                    }
                    let n: usize = fields
                        .get(1)
                        .and_then(|t| t.parse().ok())
                        .filter(|&n| n >= 1)
                        .ok_or_else(|| {
                            MorphError::parse(source, line_no, "'parts' needs a positive count")
                        })?;
                    parts = Some(n);
                }
                "label" => {
                    if fields.len() != 3 {
                        return Err(MorphError::parse(
                            source,
                            line_no,
                            "expected 'label <name> <vertex>'",
                        ));
                    }
                    let name = fields[1].to_string();
                    if labels.iter().any(|(n, _)| *n == name) {
                        return Err(MorphError::parse(
                            source,
                            line_no,
                            format!("label '{name}' declared twice"),
                        ));
                    }
                    let vertex: usize = fields[2].parse().map_err(|_| {
                        MorphError::parse(
                            source,
                            line_no,
                            format!("invalid vertex index '{}'", fields[2]),
                        )
                    })?;
                    labels.push((name, vertex));
                }
                "chain" => {
                    if fields.len() < 4 {
                        return Err(MorphError::parse(
                            source,
                            line_no,
                            "expected 'chain open|closed <label> <label> ...' with at least 2 labels",
                        ));
                    }
                    let closed = match fields[1] {
                        "open" => false,
                        "closed" => true,
                        other => {
                            return Err(MorphError::parse(
                                source,
                                line_no,
                                format!("chain flag must be 'open' or 'closed', found '{other}'"),
                            ))
                        }
                    };
                    for name in &fields[2..] {
                        if !labels.iter().any(|(n, _)| n == name) {
                            return Err(MorphError::parse(
                                source,
                                line_no,
                                format!("unknown chain label '{name}'"),
                            ));
                        }
                    }
                    chains.push(ChainSpec {
                        labels: fields[2..].iter().map(|s| s.to_string()).collect(),
                        closed,
                    });
                }
                "seed" => {
                    let vertex: usize = fields
                        .get(1)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| {
                            MorphError::parse(source, line_no, "expected 'seed <vertex>'")
                        })?;
                    seeds.push(vertex);
                }
                other => {
                    return Err(MorphError::parse(
                        source,
                        line_no,
                        format!("unknown keyword '{other}'"),
                    ));
                }
            }
        }

        let parts = parts.ok_or_else(|| {
            MorphError::parse(source, 0, "missing 'parts' declaration")
        })?;
        if seeds.len() != parts {
            return Err(MorphError::parse(
                source,
                0,
                format!("declared {} parts but {} seeds", parts, seeds.len()),
            ));
        }
        if parts >= 2 && chains.is_empty() {
            return Err(MorphError::parse(
                source,
                0,
                format!("{parts} parts need at least one boundary chain"),
            ));
        }
        Ok(PartitionSpec {
            parts,
            labels,
            chains,
            seeds,
        })
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    pub fn chains(&self) -> &[ChainSpec] {
        &self.chains
    }

    pub fn labels(&self) -> &[(String, usize)] {
        &self.labels
    }

    pub fn vertex_of_label(&self, name: &str) -> Option<usize> {
        self.labels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    /// Chain labels resolved to vertex indices (labels were checked at parse).
    pub fn chain_vertices(&self, chain: &ChainSpec) -> Vec<usize> {
        chain
            .labels
            .iter()
            .map(|name| self.vertex_of_label(name).expect("validated at parse"))
            .collect()
    }
}

/// A traced boundary: a simple vertex path through the edge graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracedBoundary {
    pub vertices: Vec<usize>,
    /// Closed boundaries implicitly connect the last vertex back to the
    /// first; the first vertex is not repeated in `vertices`.
    pub closed: bool,
}

/// A boundary polyline tagged with the two parts it separates
/// (stored as `(lower, higher)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPolyline {
    pub vertices: Vec<usize>,
    pub closed: bool,
    pub parts: (usize, usize),
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap; distance ties settle the lower vertex
        // index first, which keeps path choices deterministic.
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest edge path (Euclidean weights) between two vertices.
fn shortest_path(mesh: &Mesh, from: usize, to: usize) -> Result<Vec<usize>> {
    let n = mesh.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        vertex: from,
    });
    let positions = mesh.vertices();
    while let Some(HeapEntry { dist: d, vertex: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == to {
            break;
        }
        for &v in &mesh.adjacency()[u] {
            let nd = d + (positions[u] - positions[v]).norm();
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(HeapEntry { dist: nd, vertex: v });
            }
        }
    }
    if dist[to].is_infinite() {
        return Err(MorphError::Invalid(format!(
            "no path between landmark vertices {from} and {to}"
        )));
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    Ok(path)
}

/// Trace a boundary through the mesh: the concatenation of shortest edge
/// paths between consecutive chain landmarks (and back to the first for
/// closed chains). The result must be simple — no vertex visited twice.
pub fn trace_boundary(mesh: &Mesh, chain: &[usize], closed: bool) -> Result<TracedBoundary> {
    if chain.len() < 2 {
        return Err(MorphError::Invalid(
            "boundary chain needs at least 2 landmark vertices".into(),
        ));
    }
    for &v in chain {
        if v >= mesh.vertex_count() {
            return Err(MorphError::Invalid(format!(
                "chain references vertex {v}, but the template has {} vertices",
                mesh.vertex_count()
            )));
        }
    }
    let mut vertices: Vec<usize> = Vec::new();
    for pair in chain.windows(2) {
        let leg = shortest_path(mesh, pair[0], pair[1])?;
        let skip = usize::from(!vertices.is_empty());
        vertices.extend(&leg[skip..]);
    }
    if closed {
        let leg = shortest_path(mesh, chain[chain.len() - 1], chain[0])?;
        // Drop both endpoints; they are already in the path, and closed
        // boundaries leave the wrap-around edge implicit.
        vertices.extend(&leg[1..leg.len() - 1]);
    }
    let mut seen = HashSet::new();
    if !vertices.iter().all(|v| seen.insert(*v)) {
        return Err(MorphError::Invalid("non-simple boundary".into()));
    }
    Ok(TracedBoundary { vertices, closed })
}

/// Per-vertex part labels plus everything derived from the boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMap {
    part_count: usize,
    labels: Vec<usize>,
    polylines: Vec<BoundaryPolyline>,
    /// Distance to the nearest own-part boundary; `+inf` when the part has
    /// no adjacent boundary.
    distances: Vec<f64>,
    /// The part on the far side of that nearest boundary.
    opposite: Vec<Option<usize>>,
}

impl PartitionMap {
    pub fn part_count(&self) -> usize {
        self.part_count
    }

    /// Part label of a vertex, in `1..=part_count`.
    pub fn part_of(&self, vertex: usize) -> usize {
        self.labels[vertex]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn polylines(&self) -> &[BoundaryPolyline] {
        &self.polylines
    }

    pub fn distance(&self, vertex: usize) -> f64 {
        self.distances[vertex]
    }

    pub fn opposite(&self, vertex: usize) -> Option<usize> {
        self.opposite[vertex]
    }

    /// Vertices belonging to one part, ascending.
    pub fn part_vertices(&self, part: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&v| self.labels[v] == part)
            .collect()
    }

    /// Text form for inspection and reproducibility checks; floats print in
    /// their shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::from(PARTITION_MAP_HEADER);
        out.push('\n');
        let _ = writeln!(out, "parts {}", self.part_count);
        let _ = writeln!(out, "vertices {}", self.labels.len());
        for (i, pl) in self.polylines.iter().enumerate() {
            let kind = if pl.closed { "closed" } else { "open" };
            let verts: Vec<String> = pl.vertices.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                "polyline {i} {kind} parts {} {} vertices {}",
                pl.parts.0,
                pl.parts.1,
                verts.join(" ")
            );
        }
        for v in 0..self.labels.len() {
            let opp = match self.opposite[v] {
                Some(p) => p.to_string(),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "vertex {v} part {} dist {} opposite {opp}",
                self.labels[v], self.distances[v]
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| MorphError::io(path, e))
    }
}

/// Flood-fill part labels with boundary vertices as walls. Boundary
/// vertices end up in the adjacent part with the lower id. Distances are
/// left at the `+inf` sentinel; `boundary_distance` fills them in.
pub fn label_parts(
    mesh: &Mesh,
    boundaries: &[TracedBoundary],
    seeds: &[usize],
) -> Result<PartitionMap> {
    let n = mesh.vertex_count();
    let expected = seeds.len();
    if expected == 0 {
        return Err(MorphError::Invalid("at least one seed is required".into()));
    }
    for &s in seeds {
        if s >= n {
            return Err(MorphError::Invalid(format!(
                "seed vertex {s} is out of range ({n} vertices)"
            )));
        }
    }

    let mut wall = vec![false; n];
    for b in boundaries {
        for &v in &b.vertices {
            if v >= n {
                return Err(MorphError::Invalid(format!(
                    "boundary references vertex {v}, but the template has {n} vertices"
                )));
            }
            wall[v] = true;
        }
    }
    for &s in seeds {
        if wall[s] {
            return Err(MorphError::Invalid(format!(
                "seed vertex {s} lies on a boundary polyline"
            )));
        }
    }

    // Connected components of the graph minus walls, enumerated in vertex
    // order so the numbering is deterministic.
    let mut component = vec![usize::MAX; n];
    let mut count = 0usize;
    for start in 0..n {
        if wall[start] || component[start] != usize::MAX {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        component[start] = count;
        while let Some(u) = queue.pop_front() {
            for &v in &mesh.adjacency()[u] {
                if !wall[v] && component[v] == usize::MAX {
                    component[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    if count != expected {
        return Err(MorphError::Invalid(format!(
            "expected {expected} components, found {count}"
        )));
    }

    // Part id = seed order (1-based); each component must own one seed.
    let mut part_of_component = vec![0usize; count];
    for (i, &s) in seeds.iter().enumerate() {
        let c = component[s];
        if part_of_component[c] != 0 {
            return Err(MorphError::Invalid(format!(
                "seeds {} and {} lie in the same part",
                seeds[part_of_component[c] - 1],
                s
            )));
        }
        part_of_component[c] = i + 1;
    }

    let mut labels = vec![0usize; n];
    for v in 0..n {
        if !wall[v] {
            labels[v] = part_of_component[component[v]];
        }
    }

    // Tag polylines with their two adjacent parts.
    let mut polylines = Vec::with_capacity(boundaries.len());
    for (bi, b) in boundaries.iter().enumerate() {
        let mut adjacent = std::collections::BTreeSet::new();
        for &v in &b.vertices {
            for &u in &mesh.adjacency()[v] {
                if !wall[u] {
                    adjacent.insert(labels[u]);
                }
            }
        }
        if adjacent.len() != 2 {
            return Err(MorphError::Invalid(format!(
                "boundary polyline {bi} must separate exactly 2 parts, found {}",
                adjacent.len()
            )));
        }
        let mut it = adjacent.into_iter();
        let parts = (it.next().unwrap(), it.next().unwrap());
        polylines.push(BoundaryPolyline {
            vertices: b.vertices.clone(),
            closed: b.closed,
            parts,
        });
    }

    // Boundary vertices join the lowest adjacent part.
    for v in 0..n {
        if !wall[v] {
            continue;
        }
        let neighbor_min = mesh.adjacency()[v]
            .iter()
            .filter(|&&u| !wall[u])
            .map(|&u| labels[u])
            .min();
        labels[v] = match neighbor_min {
            Some(p) => p,
            None => polylines
                .iter()
                .filter(|pl| pl.vertices.contains(&v))
                .map(|pl| pl.parts.0)
                .min()
                .expect("wall vertex comes from some polyline"),
        };
    }

    Ok(PartitionMap {
        part_count: expected,
        labels,
        polylines,
        distances: vec![f64::INFINITY; n],
        opposite: vec![None; n],
    })
}

fn point_segment_distance_sq(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let t = (p - a).dot(&ab);
    if t <= 0.0 {
        return (p - a).norm_squared();
    }
    let denom = ab.norm_squared();
    if t >= denom {
        return (p - b).norm_squared();
    }
    let proj = a + ab * (t / denom);
    (p - proj).norm_squared()
}

/// For each vertex: Euclidean distance to the nearest boundary polyline
/// adjacent to its own part, and the part across that boundary. Parts with
/// no adjacent boundary keep the `+inf` sentinel and no opposite part.
/// Distance ties between polylines go to the lower polyline index.
pub fn boundary_distance(mesh: &Mesh, map: &PartitionMap) -> Vec<(f64, Option<usize>)> {
    let positions = mesh.vertices();
    (0..mesh.vertex_count())
        .map(|v| {
            let part = map.part_of(v);
            let mut best = f64::INFINITY;
            let mut opposite = None;
            for pl in map.polylines() {
                let other = if pl.parts.0 == part {
                    pl.parts.1
                } else if pl.parts.1 == part {
                    pl.parts.0
                } else {
                    continue;
                };
                let verts = &pl.vertices;
                let segment_count = if pl.closed {
                    verts.len()
                } else {
                    verts.len() - 1
                };
                let mut d2 = if verts.len() == 1 {
                    (positions[v] - positions[verts[0]]).norm_squared()
                } else {
                    f64::INFINITY
                };
                for s in 0..segment_count {
                    let a = verts[s];
                    let b = verts[(s + 1) % verts.len()];
                    d2 = d2.min(point_segment_distance_sq(
                        &positions[v],
                        &positions[a],
                        &positions[b],
                    ));
                }
                let d = d2.sqrt();
                if d < best {
                    best = d;
                    opposite = Some(other);
                }
            }
            (best, opposite)
        })
        .collect()
}

/// Trace chains, label parts, and fill in boundary distances in one go.
pub fn build_partition(mesh: &Mesh, spec: &PartitionSpec) -> Result<PartitionMap> {
    let boundaries: Vec<TracedBoundary> = spec
        .chains()
        .iter()
        .map(|c| trace_boundary(mesh, &spec.chain_vertices(c), c.closed))
        .collect::<Result<_>>()?;
    let mut map = label_parts(mesh, &boundaries, spec.seeds())?;
    let dists = boundary_distance(mesh, &map);
    for (v, (d, opp)) in dists.into_iter().enumerate() {
        map.distances[v] = d;
        map.opposite[v] = opp;
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Unit-spaced grid in the xy-plane; vertex id = row * nx + col.
    fn grid(nx: usize, ny: usize) -> Mesh {
        let mut vertices = Vec::new();
        for row in 0..ny {
            for col in 0..nx {
                vertices.push(Point3::new(col as f64, row as f64, 0.0));
            }
        }
        let mut faces = Vec::new();
        for row in 0..ny - 1 {
            for col in 0..nx - 1 {
                let a = row * nx + col;
                let b = a + 1;
                let c = a + nx;
                let d = c + 1;
                faces.push([a, b, d]);
                faces.push([a, d, c]);
            }
        }
        Mesh::new(vertices, faces).unwrap()
    }

    /// Exhaustive shortest-path oracle: repeated full relaxation sweeps
    /// until a fixed point (Bellman-Ford style), sidestepping the heap
    /// logic entirely.
    fn oracle_distance(mesh: &Mesh, from: usize, to: usize) -> f64 {
        let n = mesh.vertex_count();
        let mut dist = vec![f64::INFINITY; n];
        dist[from] = 0.0;
        loop {
            let mut changed = false;
            for u in 0..n {
                if dist[u].is_infinite() {
                    continue;
                }
                for &v in &mesh.adjacency()[u] {
                    let nd = dist[u] + (mesh.vertices()[u] - mesh.vertices()[v]).norm();
                    if nd < dist[v] - 1e-15 {
                        dist[v] = nd;
                        changed = true;
                    }
                }
            }
            if !changed {
                return dist[to];
            }
        }
    }

    #[test]
    fn adjacent_landmarks_trace_to_a_two_vertex_polyline() {
        let mesh = grid(4, 4);
        let b = trace_boundary(&mesh, &[1, 5], false).unwrap();
        assert_eq!(b.vertices, vec![1, 5]);
        assert!(!b.closed);
    }

    #[test]
    fn traced_path_length_matches_exhaustive_oracle() {
        let mesh = grid(10, 10);
        for &(from, to) in &[(0usize, 99usize), (3, 97), (10, 89), (0, 9)] {
            let b = trace_boundary(&mesh, &[from, to], false).unwrap();
            let mut len = 0.0;
            for w in b.vertices.windows(2) {
                len += (mesh.vertices()[w[0]] - mesh.vertices()[w[1]]).norm();
            }
            assert_relative_eq!(len, oracle_distance(&mesh, from, to), max_relative = 1e-12);
        }
    }

    #[test]
    fn disconnected_pair_is_an_error_naming_the_pair() {
        // Two separate triangles.
        let mesh = Mesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(11.0, 0.0, 0.0),
                Point3::new(10.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let err = trace_boundary(&mesh, &[0, 4], false).unwrap_err();
        assert!(err.to_string().contains("no path between landmark vertices 0 and 4"));
    }

    #[test]
    fn backtracking_chain_is_non_simple() {
        let mesh = grid(4, 4);
        let err = trace_boundary(&mesh, &[1, 5, 1], false).unwrap_err();
        assert!(err.to_string().contains("non-simple boundary"));
    }

    #[test]
    fn straight_boundary_splits_grid_into_left_and_right() {
        let nx = 7;
        let mesh = grid(nx, 5);
        // Vertical wall down column 3.
        let chain = [3, 3 + 4 * nx];
        let b = trace_boundary(&mesh, &chain, false).unwrap();
        assert_eq!(b.vertices.len(), 5);
        let map = label_parts(&mesh, &[b], &[0, 6]).unwrap();
        for row in 0..5 {
            for col in 0..nx {
                let v = row * nx + col;
                let expect = if col <= 3 { 1 } else { 2 };
                assert_eq!(map.part_of(v), expect, "vertex {v}");
            }
        }
        // Brute-force check: each part is connected.
        for part in 1..=2 {
            let verts = map.part_vertices(part);
            let inside: HashSet<usize> = verts.iter().copied().collect();
            let mut seen = HashSet::from([verts[0]]);
            let mut stack = vec![verts[0]];
            while let Some(u) = stack.pop() {
                for &v in &mesh.adjacency()[u] {
                    if inside.contains(&v) && seen.insert(v) {
                        stack.push(v);
                    }
                }
            }
            assert_eq!(seen.len(), verts.len(), "part {part} connected");
        }
    }

    #[test]
    fn single_part_no_boundaries_labels_everything_one() {
        let mesh = grid(3, 3);
        let map = label_parts(&mesh, &[], &[4]).unwrap();
        assert!(map.labels().iter().all(|&l| l == 1));
        let dists = boundary_distance(&mesh, &map);
        assert!(dists.iter().all(|(d, opp)| d.is_infinite() && opp.is_none()));
    }

    #[test]
    fn leaky_boundary_reports_component_counts() {
        let nx = 7;
        let mesh = grid(nx, 5);
        // Wall down column 3 but missing its last vertex: flood leaks around.
        let b = TracedBoundary {
            vertices: vec![3, 3 + nx, 3 + 2 * nx, 3 + 3 * nx],
            closed: false,
        };
        let err = label_parts(&mesh, &[b], &[0, 6]).unwrap_err();
        assert!(err.to_string().contains("expected 2 components, found 1"));
    }

    #[test]
    fn boundary_vertices_get_zero_distance_and_lower_part() {
        let nx = 7;
        let mesh = grid(nx, 5);
        let b = trace_boundary(&mesh, &[3, 3 + 4 * nx], false).unwrap();
        let map = label_parts(&mesh, &[b], &[0, 6]).unwrap();
        let dists = boundary_distance(&mesh, &map);
        for row in 0..5 {
            let v = row * nx + 3;
            assert_eq!(map.part_of(v), 1, "boundary joins the lower part");
            assert_eq!(dists[v].0, 0.0, "distance is exactly zero on the wall");
            assert_eq!(dists[v].1, Some(2));
        }
        // One column to the left: distance exactly 1.
        let v = 2 * nx + 2;
        assert_relative_eq!(dists[v].0, 1.0);
        assert_eq!(dists[v].1, Some(2));
        // Right side sees part 1 across the wall.
        let v = 2 * nx + 5;
        assert_relative_eq!(dists[v].0, 2.0);
        assert_eq!(dists[v].1, Some(1));
    }

    #[test]
    fn distance_is_lipschitz_along_edges() {
        let nx = 9;
        let mesh = grid(nx, 7);
        let b = trace_boundary(&mesh, &[4, 4 + 6 * nx], false).unwrap();
        let map = label_parts(&mesh, &[b], &[0, 8]).unwrap();
        let dists = boundary_distance(&mesh, &map);
        for &(u, v) in mesh.edges() {
            if map.part_of(u) != map.part_of(v) || dists[u].1 != dists[v].1 {
                continue;
            }
            let gap = (dists[u].0 - dists[v].0).abs();
            let len = (mesh.vertices()[u] - mesh.vertices()[v]).norm();
            assert!(gap <= len + 1e-12, "edge ({u},{v}): {gap} > {len}");
        }
    }

    #[test]
    fn map_serialization_is_deterministic() {
        let mesh = grid(6, 4);
        let spec = PartitionSpec::parse(
            "morphfit-partition v1\nparts 2\nlabel lo 2\nlabel hi 20\nchain open lo hi\nseed 0\nseed 5\n",
            "spec",
        )
        .unwrap();
        let a = build_partition(&mesh, &spec).unwrap().to_text();
        let b = build_partition(&mesh, &spec).unwrap().to_text();
        assert_eq!(a, b);
        assert!(a.starts_with(PARTITION_MAP_HEADER));
    }

    #[test]
    fn spec_rejects_unknown_chain_label() {
        let err = PartitionSpec::parse(
            "morphfit-partition v1\nparts 2\nlabel a 0\nchain open a ghost\nseed 1\nseed 2\n",
            "spec",
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown chain label 'ghost'"));
    }

    #[test]
    fn spec_requires_matching_seed_count() {
        let err = PartitionSpec::parse(
            "morphfit-partition v1\nparts 2\nlabel a 0\nlabel b 5\nchain open a b\nseed 1\n",
            "spec",
        )
        .unwrap_err();
        assert!(err.to_string().contains("declared 2 parts but 1 seeds"));
    }

    #[test]
    fn seed_on_wall_is_rejected() {
        let nx = 7;
        let mesh = grid(nx, 5);
        let b = trace_boundary(&mesh, &[3, 3 + 4 * nx], false).unwrap();
        let err = label_parts(&mesh, &[b], &[3, 6]).unwrap_err();
        assert!(err.to_string().contains("lies on a boundary polyline"));
    }
}
