use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

/// Below this angle the closed form is replaced by its Taylor expansion.
pub const SMALL_ANGLE: f64 = 1e-8;

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rotation matrix of an axis-angle vector (Rodrigues' formula).
pub fn rodrigues(axis_angle: &Vector3<f64>) -> Matrix3<f64> {
    let theta = axis_angle.norm();
    let k = skew(axis_angle);
    if theta < SMALL_ANGLE {
        // I + K + K²/2, exact to O(θ³)
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * k * k
}

/// Same rotation with angle folded into `[0, π]`.
pub fn canonical_axis_angle(axis_angle: &Vector3<f64>) -> Vector3<f64> {
    let theta = axis_angle.norm();
    if theta <= PI {
        return *axis_angle;
    }
    let axis = axis_angle / theta;
    let wrapped = theta.rem_euclid(2.0 * PI);
    if wrapped <= PI {
        axis * wrapped
    } else {
        -axis * (2.0 * PI - wrapped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_proper(r: &Matrix3<f64>) {
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
        assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matches_reference_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w = Vector3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let r = rodrigues(&w);
            assert_proper(&r);
            assert!((r - Rotation3::new(w).matrix()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn small_angle_branch_is_proper_and_continuous() {
        for scale in [0.0, 1e-15, 1e-12, 1e-9, 0.99e-8] {
            let w = Vector3::new(0.3, -0.5, 0.8).normalize() * scale;
            let r = rodrigues(&w);
            assert_proper(&r);
            assert!((r - Rotation3::new(w).matrix()).abs().max() < 1e-15);
        }
        let just_below = Vector3::new(1.0, 0.0, 0.0) * (SMALL_ANGLE * 0.999);
        let just_above = Vector3::new(1.0, 0.0, 0.0) * (SMALL_ANGLE * 1.001);
        assert!((rodrigues(&just_below) - rodrigues(&just_above)).abs().max() < 1e-10);
    }

    #[test]
    fn canonicalization_preserves_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let w = Vector3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
            );
            let c = canonical_axis_angle(&w);
            assert!(c.norm() <= PI + 1e-12);
            assert!((rodrigues(&w) - rodrigues(&c)).abs().max() < 1e-9);
        }
    }
}
