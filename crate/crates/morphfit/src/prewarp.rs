//! Per-part affine pre-warping with seam blending.
//!
//! Each part gets one affine fitted by least squares to the landmark pairs
//! whose template vertex lies in that part; the fit runs through an SVD so
//! rank deficiency (coplanar or collinear landmarks) is detected and handed
//! to a similarity-transform fallback instead of blowing up. Applying the
//! per-part transforms verbatim would tear the mesh along part boundaries,
//! so vertices within a band of half-width Δ around a boundary blend their
//! own part's image with the neighboring part's.

use nalgebra::{DMatrix, Matrix3, Point3, Vector3};

use crate::error::{MorphError, Result};
use crate::landmarks::LandmarkSet;
use crate::mesh::Mesh;
use crate::partition::{build_partition, PartitionMap, PartitionSpec};
use crate::transform::Affine4x3;

/// One part's fitted transform plus fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartAffine {
    pub affine: Affine4x3,
    /// RMS landmark error of the fit, in model units.
    pub residual: f64,
    /// True when the landmark matrix was rank-deficient and the fit fell
    /// back to a similarity transform.
    pub similarity_fallback: bool,
    pub landmark_count: usize,
}

/// Seam blending parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    /// Blend band half-width Δ, in model units.
    pub delta: f64,
    /// Use the blend weights exactly as printed in the source formula,
    /// which gives the larger weight to the *other* part and is therefore
    /// discontinuous at d = Δ. Off by default; kept for comparison runs.
    pub paper_literal: bool,
}

impl SmoothingConfig {
    /// Default band: 5% of the template bounding-box diagonal.
    pub fn default_for(mesh: &Mesh) -> SmoothingConfig {
        SmoothingConfig {
            delta: 0.05 * mesh.aabb().diagonal(),
            paper_literal: false,
        }
    }
}

/// Relative singular-value cutoff below which the landmark system counts
/// as rank-deficient.
const RANK_THRESHOLD: f64 = 1e-8;

/// Fit one part's affine to its (template position, target position) pairs.
///
/// Solves min_X Σ‖Xᵗ[a;1] − b‖² via the SVD pseudoinverse. When the
/// homogeneous landmark matrix is rank-deficient the affine is
/// underdetermined, so the fit falls back to the best similarity transform
/// (rotation + uniform scale + translation) and flags it.
pub fn fit_part_affine(pairs: &[(Point3<f64>, Point3<f64>)]) -> Result<PartAffine> {
    let n = pairs.len();
    if n < 4 {
        return Err(MorphError::Invalid(format!(
            "part needs at least 4 landmark pairs, found {n}"
        )));
    }

    let mut a = DMatrix::zeros(n, 4);
    let mut b = DMatrix::zeros(n, 3);
    for (r, (src, dst)) in pairs.iter().enumerate() {
        a[(r, 0)] = src.x;
        a[(r, 1)] = src.y;
        a[(r, 2)] = src.z;
        a[(r, 3)] = 1.0;
        b[(r, 0)] = dst.x;
        b[(r, 1)] = dst.y;
        b[(r, 2)] = dst.z;
    }

    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();

    let (affine, fallback) = if sigma_min < RANK_THRESHOLD * sigma_max {
        (similarity_fit(pairs)?, true)
    } else {
        let x = svd
            .solve(&b, 0.0)
            .map_err(|e| MorphError::Solver(format!("landmark fit failed: {e}")))?;
        let mut m = nalgebra::Matrix4x3::zeros();
        for r in 0..4 {
            for c in 0..3 {
                m[(r, c)] = x[(r, c)];
            }
        }
        (Affine4x3::from_matrix(m), false)
    };

    let mut sq_sum = 0.0;
    for (src, dst) in pairs {
        sq_sum += (affine.apply_point(src) - dst).norm_squared();
    }
    Ok(PartAffine {
        affine,
        residual: (sq_sum / n as f64).sqrt(),
        similarity_fallback: fallback,
        landmark_count: n,
    })
}

/// Best-fit similarity transform (c·R·p + t) between paired point sets,
/// by the closed-form orthogonal-Procrustes construction.
fn similarity_fit(pairs: &[(Point3<f64>, Point3<f64>)]) -> Result<Affine4x3> {
    let n = pairs.len() as f64;
    let mut src_mean = Vector3::zeros();
    let mut dst_mean = Vector3::zeros();
    for (src, dst) in pairs {
        src_mean += src.coords;
        dst_mean += dst.coords;
    }
    src_mean /= n;
    dst_mean /= n;

    let mut src_var = 0.0;
    let mut cov = Matrix3::zeros();
    let mut spread: f64 = 0.0;
    for (src, dst) in pairs {
        let s = src.coords - src_mean;
        let d = dst.coords - dst_mean;
        src_var += s.norm_squared();
        cov += d * s.transpose();
        spread = spread.max(s.norm());
    }
    src_var /= n;
    cov /= n;

    if spread < 1e-12 * (1.0 + src_mean.norm()) {
        return Err(MorphError::Invalid("degenerate landmark set".into()));
    }

    let svd = cov.svd(true, true);
    let u = svd.u.expect("3x3 svd");
    let v_t = svd.v_t.expect("3x3 svd");
    let mut s = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rotation = u * s * v_t;
    let scale = (svd.singular_values.dot(&s.diagonal())) / src_var;
    let translation = dst_mean - scale * rotation * src_mean;
    Ok(Affine4x3::from_parts(
        scale * rotation,
        translation,
    ))
}

/// Push every vertex through its own part's transform.
pub fn apply_scaling(
    mesh: &Mesh,
    map: &PartitionMap,
    affines: &[PartAffine],
) -> Result<Vec<Point3<f64>>> {
    if affines.len() != map.part_count() {
        return Err(MorphError::Invalid(format!(
            "expected {} part transforms, found {}",
            map.part_count(),
            affines.len()
        )));
    }
    Ok(mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, p)| affines[map.part_of(v) - 1].affine.apply_point(p))
        .collect())
}

/// Per-part transforms with the Δ-band blend at seams.
///
/// Outside the band (d ≥ Δ, or no boundary at all) a vertex takes its own
/// part's image. Inside, the images of the two parts are mixed with
/// w_own = 1/2 + d/(2Δ) and w_other = 1 − w_own. The complement is computed
/// by subtraction from 1 — exact in floating point for weights in [1/2, 1]
/// — so the pair always sums to exactly one, and at d = Δ the blend reduces
/// to the own-part image bit-for-bit, matching the d ≥ Δ branch.
/// Convex blend weights (own part, other part) for a vertex at distance
/// `d < delta` from the boundary.
///
/// w_own = ½ + d/(2Δ) lies in [½, 1], so the complement 1 − w_own is
/// computed exactly (Sterbenz) and the pair sums to exactly 1.0. At
/// d = Δ the own weight reaches 1, matching the unblended branch, which
/// makes the pre-warp continuous across the band edge. The literal
/// printed form hands the larger weight to the *other* part; it is kept
/// behind the flag for comparison and is discontinuous at d = Δ.
pub fn blend_weights(d: f64, delta: f64, paper_literal: bool) -> (f64, f64) {
    let mut w_own = 0.5 + d / (2.0 * delta);
    let mut w_other = 1.0 - w_own;
    if paper_literal {
        std::mem::swap(&mut w_own, &mut w_other);
    }
    (w_own, w_other)
}

pub fn smooth_boundaries(
    mesh: &Mesh,
    map: &PartitionMap,
    affines: &[PartAffine],
    cfg: &SmoothingConfig,
) -> Result<Vec<Point3<f64>>> {
    if !(cfg.delta > 0.0) {
        return Err(MorphError::Invalid(format!(
            "blend band half-width must be positive, got {}",
            cfg.delta
        )));
    }
    if affines.len() != map.part_count() {
        return Err(MorphError::Invalid(format!(
            "expected {} part transforms, found {}",
            map.part_count(),
            affines.len()
        )));
    }
    Ok(mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, p)| {
            let own = &affines[map.part_of(v) - 1].affine;
            let d = map.distance(v);
            let other = map.opposite(v);
            match other {
                Some(opp) if d < cfg.delta => {
                    let image_own = own.apply_point(p);
                    let image_other = affines[opp - 1].affine.apply_point(p);
                    let (w_own, w_other) = blend_weights(d, cfg.delta, cfg.paper_literal);
                    Point3::from(image_own.coords * w_own + image_other.coords * w_other)
                }
                _ => own.apply_point(p),
            }
        })
        .collect())
}

/// Everything the pre-warp produced, for downstream stages and reporting.
#[derive(Debug, Clone)]
pub struct PrewarpResult {
    pub positions: Vec<Point3<f64>>,
    pub part_affines: Vec<PartAffine>,
    pub map: PartitionMap,
    /// Vertices that fell inside the blend band.
    pub blend_band_count: usize,
}

/// Full pre-warp: partition, fit a transform per part, apply, blend.
///
/// Landmarks used for a part's fit are exactly those whose template vertex
/// carries that part's label (boundary landmarks contribute to the part
/// the deterministic boundary rule assigned them to).
pub fn prewarp_pipeline(
    mesh: &Mesh,
    landmarks: &LandmarkSet,
    spec: &PartitionSpec,
    cfg: &SmoothingConfig,
) -> Result<PrewarpResult> {
    landmarks
        .validate_for(mesh)
        .map_err(|e| e.in_stage("landmarks"))?;
    for (name, v) in spec.labels() {
        if landmarks.target_of(*v).is_none() {
            return Err(MorphError::Invalid(format!(
                "partition: label '{name}' (vertex {v}) is not a landmark"
            )));
        }
    }
    let map = build_partition(mesh, spec).map_err(|e| e.in_stage("partition"))?;

    let mut part_affines = Vec::with_capacity(map.part_count());
    for part in 1..=map.part_count() {
        let pairs: Vec<(Point3<f64>, Point3<f64>)> = landmarks
            .entries()
            .iter()
            .filter(|lm| map.part_of(lm.vertex) == part)
            .map(|lm| (mesh.vertices()[lm.vertex], lm.target))
            .collect();
        let fitted = fit_part_affine(&pairs)
            .map_err(|e| e.in_stage(&format!("prewarp part {part}")))?;
        part_affines.push(fitted);
    }

    let positions =
        smooth_boundaries(mesh, &map, &part_affines, cfg).map_err(|e| e.in_stage("smooth"))?;
    let blend_band_count = (0..mesh.vertex_count())
        .filter(|&v| map.opposite(v).is_some() && map.distance(v) < cfg.delta)
        .count();

    Ok(PrewarpResult {
        positions,
        part_affines,
        map,
        blend_band_count,
    })
}
