//! Closed-form spectral calculus for 2x2 symmetric matrices.
//!
//! Everything on Sym+(2) with the affine-invariant metric reduces to
//! eigendecompositions of 2x2 symmetric matrices, which have exact
//! closed forms. No series expansions are used.

use nalgebra::Matrix2;

/// Eigendecomposition of a symmetric 2x2 matrix: returns (eigenvalues,
/// orthonormal eigenvector matrix Q) with A = Q diag(l) Q^T.
pub fn sym_eig(a: &Matrix2<f64>) -> ([f64; 2], Matrix2<f64>) {
    let (a11, a12, a22) = (a[(0, 0)], 0.5 * (a[(0, 1)] + a[(1, 0)]), a[(1, 1)]);
    let mean = 0.5 * (a11 + a22);
    let half_gap = 0.5 * (a11 - a22);
    let disc = (half_gap * half_gap + a12 * a12).sqrt();
    let l = [mean + disc, mean - disc];
    if disc < 1e-300 {
        return (l, Matrix2::identity());
    }
    // Eigenvector for l[0]; pick the numerically larger pivot.
    let v = if half_gap >= 0.0 {
        nalgebra::Vector2::new(half_gap + disc, a12)
    } else {
        nalgebra::Vector2::new(a12, disc - half_gap)
    };
    let n = v.norm();
    let v = if n > 0.0 { v / n } else { nalgebra::Vector2::new(1.0, 0.0) };
    let q = Matrix2::new(v[0], -v[1], v[1], v[0]);
    (l, q)
}

/// Applies a scalar function to a symmetric matrix through its spectrum.
pub fn sym_apply(a: &Matrix2<f64>, f: impl Fn(f64) -> f64) -> Matrix2<f64> {
    let (l, q) = sym_eig(a);
    let d = Matrix2::new(f(l[0]), 0.0, 0.0, f(l[1]));
    q * d * q.transpose()
}

pub fn sym_exp(a: &Matrix2<f64>) -> Matrix2<f64> {
    sym_apply(a, f64::exp)
}

/// Matrix logarithm of a symmetric positive-definite matrix.
pub fn spd_log(a: &Matrix2<f64>) -> Matrix2<f64> {
    sym_apply(a, f64::ln)
}

pub fn spd_sqrt(a: &Matrix2<f64>) -> Matrix2<f64> {
    sym_apply(a, f64::sqrt)
}

pub fn spd_inv_sqrt(a: &Matrix2<f64>) -> Matrix2<f64> {
    sym_apply(a, |x| 1.0 / x.sqrt())
}
