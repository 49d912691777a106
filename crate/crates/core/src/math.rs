//! Small fixed-size linear algebra helpers shared by every module.
//!
//! Rotations are stored as plain 3x3 matrices so that downstream Jacobian
//! code can read and perturb entries directly. Construction and integration
//! paths are responsible for keeping them orthonormal; [`Rot3::renormalized`]
//! projects a drifted matrix back onto the rotation group.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthonormality tolerance enforced by [`Rot3::from_matrix`].
pub const ROTATION_TOL: f64 = 1e-9;

/// Skew-symmetric matrix of `w`, i.e. the matrix with `skew(w) * v = w x v`.
pub fn skew(w: Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// A rotation matrix (body-to-world unless stated otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot3(Mat3);

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Mat3::identity())
    }

    /// Wraps a matrix that is already known to be a rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rot3(m)
    }

    /// Wraps `m` after checking orthonormality (within [`ROTATION_TOL`]) and
    /// positive determinant.
    pub fn from_matrix(m: Mat3) -> crate::Result<Self> {
        let r = Rot3(m);
        if !r.is_orthonormal(ROTATION_TOL) {
            return Err(crate::Error::invalid(
                "rotation matrix",
                format!("not orthonormal within {ROTATION_TOL:.0e} or det != +1"),
            ));
        }
        Ok(r)
    }

    /// Exponential map: rotation by angle `|w|` about axis `w / |w|`.
    ///
    /// Uses the closed Rodrigues form; below `1e-10` rad it switches to the
    /// series `I + skew(w) + skew(w)^2 / 2`, exact to second order.
    pub fn exp(w: Vec3) -> Self {
        let theta = w.norm();
        let k = skew(w);
        let m = if theta < 1e-10 {
            Mat3::identity() + k + k * k * 0.5
        } else {
            let a = theta.sin() / theta;
            let b = (1.0 - theta.cos()) / (theta * theta);
            Mat3::identity() + k * a + k * k * b
        };
        Rot3(m)
    }

    /// Rotation about the world z axis by `yaw` radians.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Rot3(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Inverse rotation; for a rotation matrix this is the transpose.
    pub fn transpose(&self) -> Self {
        Rot3(self.0.transpose())
    }

    /// Applies the inverse rotation without forming it.
    pub fn inverse_transform(&self, v: Vec3) -> Vec3 {
        self.0.tr_mul(&v)
    }

    /// Projects the matrix back onto the rotation group.
    ///
    /// One step of the iteration `R <- R (3 I - R^T R) / 2`, which removes
    /// first-order orthonormality drift; integration steps introduce only
    /// rounding-level drift, so a single step keeps the error near machine
    /// precision.
    pub fn renormalized(&self) -> Self {
        let r = self.0;
        Rot3(r * (Mat3::identity() * 3.0 - r.transpose() * r) * 0.5)
    }

    /// True when `R^T R = I` within `tol` (entrywise) and `det R > 0`.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let gram = self.0.transpose() * self.0;
        let drift = (gram - Mat3::identity()).abs().max();
        drift <= tol && self.0.determinant() > 0.0
    }
}

impl std::ops::Mul<Vec3> for Rot3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        self.0 * v
    }
}

impl std::ops::Mul<Rot3> for Rot3 {
    type Output = Rot3;
    fn mul(self, rhs: Rot3) -> Rot3 {
        Rot3(self.0 * rhs.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn skew_matches_cross_product() {
        let w = Vec3::new(0.3, -1.2, 2.5);
        let v = Vec3::new(-0.7, 0.1, 0.9);
        let cross = w.cross(&v);
        let applied = skew(w) * v;
        assert_relative_eq!(applied, cross, epsilon = 1e-15);
    }

    #[test]
    fn skew_is_antisymmetric() {
        let w = Vec3::new(1.0, 2.0, 3.0);
        let k = skew(w);
        assert_eq!(k + k.transpose(), Mat3::zeros());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(Rot3::exp(Vec3::zeros()).matrix(), Rot3::identity().matrix());
    }

    #[test]
    fn exp_small_angle_matches_second_order_series() {
        let w = Vec3::new(1e-12, -2e-12, 5e-13);
        let expected = Mat3::identity() + skew(w) + skew(w) * skew(w) * 0.5;
        let got = *Rot3::exp(w).matrix();
        assert!((got - expected).abs().max() < 1e-24);
    }

    #[test]
    fn exp_inverse_cancels() {
        let w = Vec3::new(0.4, -0.9, 1.7);
        let prod = Rot3::exp(w) * Rot3::exp(-w);
        let drift = (prod.matrix() - Mat3::identity()).abs().max();
        assert!(drift < 1e-12, "exp(w) exp(-w) drift {drift}");
    }

    #[test]
    fn yaw_rotation_turns_x_axis() {
        let r = Rot3::from_yaw(std::f64::consts::FRAC_PI_2);
        let x = r * Vec3::x();
        assert_relative_eq!(x, Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn renormalize_restores_orthonormality() {
        // Perturb a rotation with entrywise noise of order 1e-8.
        let mut m = *Rot3::exp(Vec3::new(0.2, 0.3, -0.1)).matrix();
        m[(0, 1)] += 3e-8;
        m[(2, 0)] -= 2e-8;
        let fixed = Rot3::from_matrix_unchecked(m).renormalized();
        assert!(fixed.is_orthonormal(1e-12));
    }

    #[test]
    fn from_matrix_rejects_non_rotation() {
        let m = Mat3::identity() * 1.001;
        assert!(Rot3::from_matrix(m).is_err());
    }

    proptest! {
        #[test]
        fn exp_is_orthonormal_for_any_axis(
            x in -6.0f64..6.0, y in -6.0f64..6.0, z in -6.0f64..6.0
        ) {
            let r = Rot3::exp(Vec3::new(x, y, z));
            prop_assert!(r.is_orthonormal(1e-12));
        }

        #[test]
        fn skew_linear_in_argument(
            a in -5.0f64..5.0, b in -5.0f64..5.0,
            x in -5.0f64..5.0, y in -5.0f64..5.0, z in -5.0f64..5.0
        ) {
            let w1 = Vec3::new(x, y, z);
            let w2 = Vec3::new(z, x, y);
            let lhs = skew(w1 * a + w2 * b);
            let rhs = skew(w1) * a + skew(w2) * b;
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }
    }
}
