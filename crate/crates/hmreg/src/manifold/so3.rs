//! Rodrigues-formula helpers for SO(3).

use nalgebra::{Matrix3, Vector3};

/// Hat operator: axis vector to skew-symmetric matrix.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// Vee operator: skew-symmetric matrix to axis vector.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Matrix exponential of a skew-symmetric matrix (Rodrigues).
pub fn skew_exp(omega: &Matrix3<f64>) -> Matrix3<f64> {
    let w = vee(omega);
    let theta = w.norm();
    if theta < 1e-12 {
        // Second-order expansion keeps orthogonality error at O(theta^3).
        return Matrix3::identity() + omega + 0.5 * omega * omega;
    }
    let k = omega / theta;
    Matrix3::identity() + theta.sin() * k + (1.0 - theta.cos()) * (k * k)
}

/// Rotation angle of a rotation matrix, in [0, pi].
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    // atan2 of (sin, cos) is accurate at both ends of [0, pi],
    // unlike acos of the trace alone.
    let c = 0.5 * (r.trace() - 1.0);
    let s = vee(&(0.5 * (r - r.transpose()))).norm();
    s.atan2(c)
}

/// Matrix logarithm of a rotation matrix with angle strictly below pi.
/// Returns None at (or numerically at) the cut locus.
pub fn rotation_log(r: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let tr = r.trace();
    if tr <= -1.0 + 1e-6 {
        return None;
    }
    let theta = rotation_angle(r);
    let skew = 0.5 * (r - r.transpose());
    if theta < 1e-12 {
        return Some(skew);
    }
    Some(theta / theta.sin() * skew)
}
