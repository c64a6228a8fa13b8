//! Small dense linear-algebra helpers on top of nalgebra, plus exact rank.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_rational::BigRational;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

/// Numerical rank with singular values below `rel_tol * sigma_max` treated as zero.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Exact rank by fraction-exact Gaussian elimination; `rows` may be ragged-free.
pub fn exact_rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, piv);
        let pivot_row = rows[rank].clone();
        for r in (rank + 1)..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let f = &rows[r][col] / &pivot_row[col];
            for c in col..ncols {
                let d = &f * &pivot_row[c];
                rows[r][c] -= d;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Minimal-norm least-squares solution of `m x = b` via the pseudo-inverse.
pub fn min_norm_solve(m: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (rel_tol * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Real eigen-decomposition of a trace-free 2x2 matrix with negative determinant.
///
/// Returns `(lambda_minus, v_minus, lambda_plus, v_plus)` with unit eigenvectors.
pub fn saddle_eigen(a: &Matrix2<f64>) -> Option<(f64, Vector2<f64>, f64, Vector2<f64>)> {
    let det = a.determinant();
    if !(det < 0.0) {
        return None;
    }
    let lam = (-det).sqrt();
    Some((-lam, eigvec(a, -lam), lam, eigvec(a, lam)))
}

/// Unit vector spanning `ker(A - lambda I)`, chosen from the better-conditioned row.
pub fn eigvec(a: &Matrix2<f64>, lambda: f64) -> Vector2<f64> {
    let b = a - Matrix2::identity() * lambda;
    let r0 = Vector2::new(-b[(0, 1)], b[(0, 0)]);
    let r1 = Vector2::new(-b[(1, 1)], b[(1, 0)]);
    let v = if r0.norm() >= r1.norm() { r0 } else { r1 };
    let n = v.norm();
    if n == 0.0 {
        Vector2::new(1.0, 0.0)
    } else {
        v / n
    }
}

/// Angle in `[0, pi/2]` between the lines spanned by `a` and `b`.
pub fn line_angle(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    c.acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ratio;

    #[test]
    fn ranks_agree_on_singular_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(numerical_rank(&m, 1e-10), 2);
        let rows = [[1, 2, 3], [2, 4, 6], [0, 1, 1]].iter().map(|r| r.iter().map(|&x| ratio(x, 1)).collect()).collect();
        assert_eq!(exact_rank(rows), 2);
    }

    #[test]
    fn min_norm_solution_of_underdetermined_system() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = min_norm_solve(&m, &DVector::from_vec(alloc::vec![2.0]), 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn saddle_eigenvectors() {
        let a = Matrix2::new(-1.0, 0.0, 0.0, 1.0);
        let (lm, vm, lp, vp) = saddle_eigen(&a).unwrap();
        assert_eq!((lm, lp), (-1.0, 1.0));
        assert!(line_angle(&vm, &Vector2::new(1.0, 0.0)) < 1e-15);
        assert!(line_angle(&vp, &Vector2::new(0.0, 1.0)) < 1e-15);
        assert!(saddle_eigen(&Matrix2::new(0.0, 1.0, -1.0, 0.0)).is_none());
    }
}
