//! Small dense helpers shared by the per-node evaluators.
//!
//! Grid sweeps evaluate these millions of times, so the 3×3 paths avoid
//! allocation and iterative decompositions.

use nalgebra::{DMatrix, Matrix3};
use std::f64::consts::PI;

/// Eigenvalues of a symmetric 3×3 matrix in ascending order.
///
/// Closed-form trigonometric solution of the characteristic cubic. Only the
/// upper triangle is read.
pub fn sym3_eigenvalues(a: &Matrix3<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    if p1 == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = Matrix3::new(
        a[(0, 0)] - q,
        a[(0, 1)],
        a[(0, 2)],
        a[(0, 1)],
        a[(1, 1)] - q,
        a[(1, 2)],
        a[(0, 2)],
        a[(1, 2)],
        a[(2, 2)] - q,
    ) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    [lo, mid, hi]
}

/// Largest eigenvalue of a symmetric 3×3 matrix.
pub fn sym3_max_eigenvalue(a: &Matrix3<f64>) -> f64 {
    sym3_eigenvalues(a)[2]
}

/// 2-norm condition number of a square matrix via its singular values.
/// Returns infinity for rank-deficient input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Skew-symmetric cross-product matrix, `skew(r) * v == r × v`.
pub fn skew(r: &nalgebra::Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn diagonal_input_is_sorted() {
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(3.0, -1.0, 2.0));
        assert_eq!(sym3_eigenvalues(&m), [-1.0, 2.0, 3.0]);
    }

    #[test]
    fn matches_iterative_eigensolver() {
        let seeds = [0.3, 1.7, -2.2, 0.9, 4.1, -0.4];
        for k in 0..50 {
            let s = |i: usize| (seeds[i % 6] * (k as f64 + 1.0) * 1.37).sin() * 3.0;
            let m = Matrix3::new(s(0), s(1), s(2), s(1), s(3), s(4), s(2), s(4), s(5));
            let mut oracle: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            oracle.sort_by(f64::total_cmp);
            let got = sym3_eigenvalues(&m);
            for (g, o) in got.iter().zip(&oracle) {
                assert!((g - o).abs() < 1e-12 * (1.0 + m.norm()), "{got:?} vs {oracle:?}");
            }
        }
    }

    #[test]
    fn repeated_eigenvalues() {
        let m = Matrix3::new(2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0);
        let ev = sym3_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-14);
        assert!((ev[1] - 1.0).abs() < 1e-14);
        assert!((ev[2] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn skew_is_cross_product() {
        let r = nalgebra::Vector3::new(0.3, -1.2, 2.0);
        let v = nalgebra::Vector3::new(-0.7, 0.1, 0.5);
        assert!((skew(&r) * v - r.cross(&v)).norm() < 1e-15);
    }
}
