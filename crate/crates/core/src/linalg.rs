//! Small dense symmetric-positive-definite helpers.
//!
//! Model dimensions here are modest (tens of columns), so an unblocked
//! Cholesky with an explicit pivot tolerance is both fast enough and lets the
//! rank check reject near-degenerate bases deterministically.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("Cholesky pivot {pivot:.3e} at column {col} below tolerance")]
    RankDeficient { col: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Relative pivot tolerance for the rank check, applied against the largest
/// diagonal entry of the input matrix.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Fails with `RankDeficient` when a pivot falls below
/// `CHOLESKY_PIVOT_TOL * max_diag`, which is how rank-deficient candidate
/// models are detected and rejected upstream.
pub fn cholesky(a: ArrayView2<f64>) -> Result<Array2<f64>, LinalgError> {
    cholesky_with_tol(a, CHOLESKY_PIVOT_TOL)
}

pub fn cholesky_with_tol(a: ArrayView2<f64>, tol: f64) -> Result<Array2<f64>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    let mut max_diag = 0.0f64;
    for i in 0..n {
        max_diag = max_diag.max(a[[i, i]].abs());
    }
    let threshold = if max_diag > 0.0 { tol * max_diag } else { tol };
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > threshold) {
            return Err(LinalgError::RankDeficient { col: j, pivot: d });
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn solve_lower(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>, LinalgError> {
    let n = l.nrows();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut y = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let adj = l[[i, k]] * y[k];
            y[i] -= adj;
        }
        y[i] /= l[[i, i]];
    }
    Ok(y)
}

/// Solves `L^T x = y` for lower-triangular `L`.
pub fn solve_lower_transpose(
    l: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<Array1<f64>, LinalgError> {
    let n = l.nrows();
    if y.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let mut x = y.to_owned();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let adj = l[[k, i]] * x[k];
            x[i] -= adj;
        }
        x[i] /= l[[i, i]];
    }
    Ok(x)
}

/// Solves `A x = b` given the lower Cholesky factor of `A`.
pub fn chol_solve(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>, LinalgError> {
    let y = solve_lower(l, b)?;
    solve_lower_transpose(l, y.view())
}

/// Solves the SPD system `A x = b` directly.
pub fn solve_spd(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>, LinalgError> {
    let l = cholesky(a)?;
    chol_solve(l.view(), b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn cholesky_recovers_spd_solve() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let b = array![1.0, -2.0, 0.5];
        let x = solve_spd(a.view(), b.view()).unwrap();
        let r = a.dot(&x) - &b;
        for v in r.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_rank_deficient() {
        // second column is a multiple of the first
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(
            cholesky(a.view()),
            Err(LinalgError::RankDeficient { .. })
        ));
    }

    #[test]
    fn triangular_solves_are_inverses() {
        let a = array![[2.0, 0.3], [0.3, 1.5]];
        let l = cholesky(a.view()).unwrap();
        let b = array![0.7, -1.1];
        let y = solve_lower(l.view(), b.view()).unwrap();
        let x = solve_lower_transpose(l.view(), y.view()).unwrap();
        let direct = chol_solve(l.view(), b.view()).unwrap();
        for (u, v) in x.iter().zip(direct.iter()) {
            assert_abs_diff_eq!(*u, *v, epsilon = 1e-14);
        }
    }
}
