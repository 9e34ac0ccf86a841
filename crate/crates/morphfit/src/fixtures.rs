//! Synthetic registration scenes with exact ground truth.
//!
//! The ribbon pair is a minimal, fully analyzable instance of the
//! local-minimum trap that motivates the pre-warp: a flat two-row band
//! whose raised ridge must slide sideways and stretch onto a taller,
//! narrower ridge. Plain alternation locks the ridge flanks onto the
//! wrong side of the target ridge and stays there; partitioning the band
//! at the ridge base and pre-warping each part with its own affine starts
//! the solve inside the correct basin.
//!
//! The face pair is a coarse dome with a raised nose, the same story in
//! mesh-target form.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::config::RegistrationConfig;
use crate::landmarks::{Landmark, LandmarkSet};
use crate::mesh::{Mesh, PointCloud};
use crate::partition::PartitionSpec;
use crate::transform::Affine4x3;

/// Height of the target ribbon's ridge (the template's is 1).
pub const RIBBON_FEATURE_HEIGHT: f64 = 3.0;

/// Columns per ribbon row; vertex v = row·RIBBON_COLS + col, rows 0 and 1.
pub const RIBBON_COLS: usize = 11;

/// Template ridge profile over columns 4..=10.
const RIDGE: [f64; 7] = [0.15, 0.55, 0.85, 1.0, 0.85, 0.55, 0.15];

fn ridge_z(col: usize) -> f64 {
    if (4..=10).contains(&col) {
        RIDGE[col - 4]
    } else {
        0.0
    }
}

/// Two-row ribbon, 22 vertices, with a ridge over columns 4..=10.
pub fn ribbon_template() -> Mesh {
    let mut vertices = Vec::with_capacity(2 * RIBBON_COLS);
    for row in 0..2 {
        for col in 0..RIBBON_COLS {
            vertices.push(Point3::new(col as f64, row as f64, ridge_z(col)));
        }
    }
    let mut faces = Vec::with_capacity(2 * (RIBBON_COLS - 1));
    for col in 0..RIBBON_COLS - 1 {
        let (a, b) = (col, col + 1);
        let (c, d) = (col + RIBBON_COLS, col + RIBBON_COLS + 1);
        faces.push([a, b, d]);
        faces.push([a, d, c]);
    }
    Mesh::new(vertices, faces).unwrap()
}

/// The affine carrying the template ridge onto the target's: half as wide,
/// three times taller, apex moved from x = 7 to x = 7.8.
pub fn ridge_affine() -> Affine4x3 {
    Affine4x3::from_parts(
        Matrix3::from_diagonal(&Vector3::new(0.5, 1.0, 3.0)),
        Vector3::new(4.3, 0.0, 0.0),
    )
}

/// Where each template vertex truly belongs on the target: the base
/// columns 0..=3 stay put, the ridge columns go through `ridge_affine`.
pub fn ribbon_true_positions() -> Vec<Point3<f64>> {
    let warp = ridge_affine();
    ribbon_template()
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, p)| {
            if v % RIBBON_COLS >= 4 {
                warp.apply_point(p)
            } else {
                *p
            }
        })
        .collect()
}

/// Target scan: one point per true template vertex position, no normals.
pub fn ribbon_target() -> PointCloud {
    PointCloud::new(ribbon_true_positions(), None).unwrap()
}

/// The ridge vertices (columns 4..=10, both rows).
pub fn ribbon_feature_vertices() -> Vec<usize> {
    (0..2)
        .flat_map(|row| (4..RIBBON_COLS).map(move |col| row * RIBBON_COLS + col))
        .collect()
}

/// The single apex landmark: vertex 7 onto the target ridge apex.
pub fn ribbon_apex_landmark() -> LandmarkSet {
    LandmarkSet::new(vec![Landmark {
        vertex: 7,
        target: Point3::new(7.8, 0.0, RIBBON_FEATURE_HEIGHT),
    }])
    .unwrap()
}

/// Ten landmarks covering both parts: the base corners and ridge-base
/// columns at rest, plus ridge flanks and apex at their true positions.
pub fn ribbon_full_landmarks() -> LandmarkSet {
    let truth = ribbon_true_positions();
    LandmarkSet::new(
        [0, 3, 11, 14, 4, 7, 10, 15, 18, 21]
            .iter()
            .map(|&v| Landmark {
                vertex: v,
                target: truth[v],
            })
            .collect(),
    )
    .unwrap()
}

/// Two parts split at the ridge base (the column-3 rung).
pub fn ribbon_partition_spec() -> PartitionSpec {
    let text = "morphfit-partition v1\n\
                parts 2\n\
                label base_bottom 3\n\
                label base_top 14\n\
                chain open base_bottom base_top\n\
                seed 0\n\
                seed 10\n";
    PartitionSpec::parse(text, "ribbon").unwrap()
}

/// Registration settings for the ribbon: a soft landmark pull (the trap
/// must survive it), no normal term (the target is a bare point cloud),
/// and a stiffness sweep wide enough to let the ridge deform.
pub fn ribbon_config() -> RegistrationConfig {
    RegistrationConfig {
        alpha: 1.0,
        gamma: 0.1,
        eta: 0.0,
        beta_schedule: (0..8)
            .map(|k| 100.0 * 0.001f64.powf(k as f64 / 7.0))
            .collect(),
        epsilon: 1e-6,
        max_inner: 50,
        delta: Some(0.5),
        ..Default::default()
    }
}

/// Root-mean-square distance from `positions` to `truth` over `vertices`.
pub fn rms_over(positions: &[Point3<f64>], truth: &[Point3<f64>], vertices: &[usize]) -> f64 {
    let sum: f64 = vertices
        .iter()
        .map(|&v| (positions[v] - truth[v]).norm_squared())
        .sum();
    (sum / vertices.len() as f64).sqrt()
}

/// Dome on an n×n grid over [−1,1]², with a nose-like secondary bump
/// below center. `nose` scales the bump: the template uses a low wide
/// nose, the target a tall narrow one.
fn dome_heights(x: f64, y: f64, nose_height: f64, nose_width: f64) -> f64 {
    let dome = 0.55 * (-0.8 * (x * x + y * y)).exp();
    let nx = x / nose_width;
    let ny = (y + 0.1) / (1.4 * nose_width);
    dome + nose_height * (-(nx * nx + ny * ny)).exp()
}

fn grid_mesh(n: usize, height: impl Fn(f64, f64) -> f64) -> Mesh {
    let step = 2.0 / (n - 1) as f64;
    let mut vertices = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let x = -1.0 + col as f64 * step;
            let y = -1.0 + row as f64 * step;
            vertices.push(Point3::new(x, y, height(x, y)));
        }
    }
    let mut faces = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for row in 0..n - 1 {
        for col in 0..n - 1 {
            let a = row * n + col;
            let b = a + 1;
            let c = a + n;
            let d = a + n + 1;
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    Mesh::new(vertices, faces).unwrap()
}

/// Face-like template: dome with a low, wide nose.
pub fn face_template(n: usize) -> Mesh {
    grid_mesh(n, |x, y| dome_heights(x, y, 0.35, 0.28))
}

/// Face-like target: same dome, nose twice as tall and narrower.
pub fn face_target(n: usize) -> Mesh {
    grid_mesh(n, |x, y| dome_heights(x, y, 0.7, 0.16))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TargetSurface;
    use crate::prewarp::{prewarp_pipeline, SmoothingConfig};
    use crate::solver::register;

    /// Nearest target column for each bottom-row ridge vertex, by
    /// exhaustive scan over the cloud.
    fn nearest_columns(positions: &[Point3<f64>]) -> Vec<usize> {
        let cloud = ribbon_target();
        (4..RIBBON_COLS)
            .map(|col| {
                let p = positions[col];
                let (best, _) = cloud.points().iter().enumerate().fold(
                    (0usize, f64::INFINITY),
                    |(bi, bd), (i, q)| {
                        let d = (p - q).norm_squared();
                        if d < bd {
                            (i, d)
                        } else {
                            (bi, bd)
                        }
                    },
                );
                best % RIBBON_COLS
            })
            .collect()
    }

    #[test]
    fn ribbon_geometry_is_consistent() {
        let template = ribbon_template();
        assert_eq!(template.vertex_count(), 22);
        assert_eq!(template.faces().len(), 20);
        // Apex and its true match.
        assert_eq!(template.vertices()[7], Point3::new(7.0, 0.0, 1.0));
        assert_eq!(
            ribbon_true_positions()[7],
            Point3::new(7.8, 0.0, RIBBON_FEATURE_HEIGHT)
        );
        // Base columns are their own truth.
        assert_eq!(ribbon_true_positions()[3], template.vertices()[3]);
    }

    #[test]
    fn ribbon_baseline_falls_into_the_documented_trap() {
        let template = ribbon_template();
        let target = TargetSurface::PointCloud(ribbon_target());
        let result = register(
            &template,
            &target,
            &ribbon_apex_landmark(),
            &ribbon_config(),
        )
        .unwrap();

        let mut columns = nearest_columns(result.warped.vertices());
        columns.sort_unstable();
        assert_eq!(columns, vec![3, 4, 4, 5, 9, 10, 10]);

        let rms = rms_over(
            result.warped.vertices(),
            &ribbon_true_positions(),
            &ribbon_feature_vertices(),
        );
        assert!(
            rms > 0.3 * RIBBON_FEATURE_HEIGHT,
            "trapped solve should stay far from truth, rms {rms}"
        );
    }

    #[test]
    fn ribbon_prewarp_escapes_the_trap() {
        let template = ribbon_template();
        let landmarks = ribbon_full_landmarks();
        let pre = prewarp_pipeline(
            &template,
            &landmarks,
            &ribbon_partition_spec(),
            &SmoothingConfig {
                delta: 0.5,
                paper_literal: false,
            },
        )
        .unwrap();
        let prewarped = template.with_positions(pre.positions.clone()).unwrap();
        let target = TargetSurface::PointCloud(ribbon_target());
        let result = register(&prewarped, &target, &landmarks, &ribbon_config()).unwrap();
        let rms = rms_over(
            result.warped.vertices(),
            &ribbon_true_positions(),
            &ribbon_feature_vertices(),
        );
        assert!(
            rms < 0.05 * RIBBON_FEATURE_HEIGHT,
            "pre-warped solve should land on truth, rms {rms}"
        );
    }

    #[test]
    fn face_pair_is_well_formed() {
        // Odd grid so the nose centerline x = 0 lands on a vertex column.
        let template = face_template(13);
        let target = face_target(13);
        assert_eq!(template.vertex_count(), 169);
        assert_eq!(template.vertex_count(), target.vertex_count());
        // The nose really is taller in the target.
        let peak_t = template.vertices().iter().map(|p| p.z).fold(f64::MIN, f64::max);
        let peak_s = target.vertices().iter().map(|p| p.z).fold(f64::MIN, f64::max);
        assert!(peak_s > peak_t + 0.2);
    }
}
