//! Affine transforms in the crate-wide homogeneous convention.
//!
//! Every transform in this crate — the per-part pre-warp matrices and the
//! per-vertex unknowns of the registration solve — is stored as a single
//! 4×3 matrix `X` and applied to a point as `Xᵗ·[p; 1]`. The upper 3×3
//! block holds the transpose of the linear part and the fourth row holds
//! the translation. Directions (normals) are mapped as `Xᵗ·[v; 0]`, which
//! drops the translation row.
//!
//! Fixing one storage layout avoids juggling both the 3×4 "row" and 4×3
//! "column" shapes that appear in the literature; converters to the 3×4
//! form are provided for interop.

use nalgebra::{Matrix3, Matrix3x4, Matrix4x3, Point3, Vector3, Vector4};

/// A 3D affine transform stored 4×3, applied as `Xᵗ·[p; 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine4x3 {
    matrix: Matrix4x3<f64>,
}

impl Affine4x3 {
    /// The identity transform.
    pub fn identity() -> Self {
        Self::from_parts(Matrix3::identity(), Vector3::zeros())
    }

    /// Wrap a raw 4×3 matrix already in the storage convention.
    pub fn from_matrix(matrix: Matrix4x3<f64>) -> Self {
        Affine4x3 { matrix }
    }

    /// Build from a linear map `L` and translation `t`, so that
    /// `apply_point(p) = L·p + t`.
    pub fn from_parts(linear: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let mut matrix = Matrix4x3::zeros();
        matrix
            .fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&linear.transpose());
        matrix.row_mut(3).copy_from(&translation.transpose());
        Affine4x3 { matrix }
    }

    /// A pure translation.
    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::from_parts(Matrix3::identity(), translation)
    }

    pub fn matrix(&self) -> &Matrix4x3<f64> {
        &self.matrix
    }

    /// The equivalent 3×4 row-form matrix `[L | t]`.
    pub fn to_3x4(&self) -> Matrix3x4<f64> {
        self.matrix.transpose()
    }

    /// Build from the 3×4 row form `[L | t]`.
    pub fn from_3x4(m: &Matrix3x4<f64>) -> Self {
        Affine4x3 {
            matrix: m.transpose(),
        }
    }

    /// The linear part `L` acting as `L·p`.
    pub fn linear(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).transpose()
    }

    /// The translation row.
    pub fn translation(&self) -> Vector3<f64> {
        self.matrix.row(3).transpose()
    }

    /// Map a point: `Xᵗ·[p; 1]`.
    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        let h = Vector4::new(p.x, p.y, p.z, 1.0);
        Point3::from(self.matrix.transpose() * h)
    }

    /// Map a direction: `Xᵗ·[v; 0]` (no translation).
    pub fn apply_direction(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let h = Vector4::new(v.x, v.y, v.z, 0.0);
        self.matrix.transpose() * h
    }

    /// Squared Frobenius distance to another transform, with the translation
    /// row scaled by `translation_weight` (1.0 = the plain Frobenius norm).
    pub fn frobenius_distance_sq(&self, other: &Self, translation_weight: f64) -> f64 {
        let d = self.matrix - other.matrix;
        let mut sum = 0.0;
        for r in 0..3 {
            for c in 0..3 {
                sum += d[(r, c)] * d[(r, c)];
            }
        }
        let mut t = 0.0;
        for c in 0..3 {
            t += d[(3, c)] * d[(3, c)];
        }
        sum + translation_weight * t
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|v| v.is_finite())
    }
}
