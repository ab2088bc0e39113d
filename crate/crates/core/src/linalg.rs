//! Just enough dense linear algebra for the synthesizer's small
//! least-squares fits: a Cholesky factorization and solve for symmetric
//! positive definite systems. Matrices here are a few hundred rows at most
//! (one per retained mode), so a textbook O(n^3) factorization is plenty.

use crate::scalar::Scalar;

/// Solves A x = b for symmetric positive definite A (row-major, n x n) by
/// Cholesky factorization. Returns None when a pivot is not positive, i.e.
/// the matrix is not (numerically) positive definite.
pub fn solve_spd<T: Scalar>(a: &[T], n: usize, b: &[T]) -> Option<Vec<T>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);

    // lower-triangular factor, row-major
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= T::zero() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }

    // L y = b
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    // L^T x = y
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}
