//! Shared oracles for the integration suites.
//!
//! Everything here re-derives results from first principles — dense
//! normal equations built out of explicit residual rows, point–triangle
//! distance via barycentric projection — so the library's sparse solver
//! and BVH traversal are checked against genuinely different arithmetic.

use nalgebra::{DMatrix, Point3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use morphfit::{CorrespondenceSet, EnergyWeights, LandmarkSet, Mesh};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected triangle mesh with `n` vertices: seed triangle, then
/// every new vertex is glued onto a randomly chosen existing edge, so the
/// face graph stays connected by construction. Positions fill a unit-ish
/// box with enough z-spread to keep the registration system definite.
pub fn random_connected_mesh(r: &mut ChaCha8Rng, n: usize) -> Mesh {
    assert!(n >= 3);
    let vertices: Vec<Point3<f64>> = (0..n)
        .map(|_| {
            Point3::new(
                r.gen_range(-1.0..1.0),
                r.gen_range(-1.0..1.0),
                r.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let mut faces = vec![[0usize, 1, 2]];
    let mut edges = vec![(0usize, 1usize), (1, 2), (0, 2)];
    for v in 3..n {
        let &(a, b) = &edges[r.gen_range(0..edges.len())];
        faces.push([a, b, v]);
        edges.push((a, v));
        edges.push((b, v));
    }
    Mesh::new(vertices, faces).unwrap()
}

/// Dense brute-force solve of the registration normal equations.
///
/// Residual rows are written out explicitly from the energy definition —
/// √(αwᵢ)·[Vᵢ;1] data rows, √(β sᵣ) edge-difference rows, √γ landmark
/// rows, √(ηwᵢ)·[Nᵢ;0] normal rows — stacked into a dense matrix A per
/// coordinate column, then AᵗA x = Aᵗb is solved densely. Returns the
/// 4n×3 solution.
pub fn dense_normal_equations_solve(
    mesh: &Mesh,
    corr: &CorrespondenceSet,
    landmarks: &LandmarkSet,
    weights: &EnergyWeights,
) -> DMatrix<f64> {
    let n = mesh.vertex_count();
    let mut rows: Vec<(usize, [f64; 4], Vector3<f64>)> = Vec::new();
    for (i, c) in corr.entries().iter().enumerate() {
        let w = (weights.alpha * c.weight).sqrt();
        if w > 0.0 {
            let p = mesh.vertices()[i];
            rows.push((i, [w * p.x, w * p.y, w * p.z, w], w * c.position.coords));
        }
        if let Some(tn) = c.normal {
            let w = (weights.eta * c.weight).sqrt();
            if w > 0.0 {
                let nrm = mesh.vertex_normals()[i];
                rows.push((i, [w * nrm.x, w * nrm.y, w * nrm.z, 0.0], w * tn));
            }
        }
    }
    for lm in landmarks.entries() {
        let w = weights.gamma.sqrt();
        if w > 0.0 {
            let p = mesh.vertices()[lm.vertex];
            rows.push((
                lm.vertex,
                [w * p.x, w * p.y, w * p.z, w],
                w * lm.target.coords,
            ));
        }
    }

    let edge_rows = 4 * mesh.edge_count();
    let mut a = DMatrix::<f64>::zeros(rows.len() + edge_rows, 4 * n);
    let mut b = DMatrix::<f64>::zeros(a.nrows(), 3);
    for (row, (vertex, coeffs, target)) in rows.iter().enumerate() {
        for c in 0..4 {
            a[(row, 4 * vertex + c)] = coeffs[c];
        }
        for k in 0..3 {
            b[(row, k)] = target[k];
        }
    }
    for (e, &(i, j)) in mesh.edges().iter().enumerate() {
        for r in 0..4 {
            let s = if r == 3 {
                weights.translation_weight
            } else {
                1.0
            };
            let w = (weights.beta * s).sqrt();
            let row = rows.len() + 4 * e + r;
            a[(row, 4 * i + r)] = w;
            a[(row, 4 * j + r)] = -w;
        }
    }

    let ata = a.transpose() * &a;
    let atb = a.transpose() * &b;
    ata.cholesky()
        .expect("oracle system not positive definite")
        .solve(&atb)
}

/// Independent point–triangle distance: project onto the triangle plane,
/// test barycentric containment, otherwise clamp onto each edge segment.
/// A different derivation from the production region-classification code.
pub fn point_triangle_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let nrm = ab.cross(&ac);
    let nn = nrm.norm_squared();
    let mut best = f64::INFINITY;
    if nn > 0.0 {
        // Barycentric coordinates of the in-plane projection.
        let ap = p - a;
        let d00 = ab.dot(&ab);
        let d01 = ab.dot(&ac);
        let d11 = ac.dot(&ac);
        let d20 = ap.dot(&ab);
        let d21 = ap.dot(&ac);
        let denom = d00 * d11 - d01 * d01;
        if denom > 0.0 {
            let v = (d11 * d20 - d01 * d21) / denom;
            let w = (d00 * d21 - d01 * d20) / denom;
            if v >= 0.0 && w >= 0.0 && v + w <= 1.0 {
                let foot = a + ab * v + ac * w;
                best = (p - foot).norm();
            }
        }
    }
    for (s, e) in [(a, b), (a, c), (b, c)] {
        let d = e - s;
        let len_sq = d.norm_squared();
        let t = if len_sq > 0.0 {
            ((p - s).dot(&d) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let foot = s + d * t;
        best = best.min((p - foot).norm());
    }
    best
}

/// Exhaustive closest-distance scan over all faces.
pub fn exhaustive_mesh_distance(mesh: &Mesh, p: &Point3<f64>) -> f64 {
    let vs = mesh.vertices();
    mesh.faces()
        .iter()
        .map(|f| point_triangle_distance(p, &vs[f[0]], &vs[f[1]], &vs[f[2]]))
        .fold(f64::INFINITY, f64::min)
}

pub fn random_point(r: &mut ChaCha8Rng, spread: f64) -> Point3<f64> {
    Point3::new(
        r.gen_range(-spread..spread),
        r.gen_range(-spread..spread),
        r.gen_range(-spread..spread),
    )
}

pub fn random_unit(r: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
        );
        let len = v.norm();
        if len > 1e-3 {
            return v / len;
        }
    }
}
