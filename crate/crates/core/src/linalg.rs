//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("regressor {column} is collinear with earlier columns")]
    Collinear { column: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Relative residual-norm threshold below which a column is treated as a
/// linear combination of the preceding ones.
pub const COLLINEARITY_TOL: f64 = 1e-10;

/// Index of the first column of `x` that is (numerically) spanned by the
/// columns before it, via modified Gram–Schmidt.
pub fn first_collinear_column(x: &DMatrix<f64>) -> Option<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            return Some(j);
        }
        let mut r = col;
        for q in &basis {
            let proj = q.dot(&r);
            r -= q * proj;
        }
        let rn = r.norm();
        if rn <= COLLINEARITY_TOL * norm {
            return Some(j);
        }
        basis.push(r / rn);
    }
    None
}

/// Least-squares fit `y ≈ X b` for every column of `y` at once.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// `k × m` coefficients, one column per response.
    pub coef: DMatrix<f64>,
    /// `n × m` residuals.
    pub resid: DMatrix<f64>,
    /// `(X'X)^{-1}`, used for standard errors.
    pub xtx_inv: DMatrix<f64>,
}

pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LeastSquares, LinalgError> {
    if x.nrows() != y.nrows() {
        return Err(LinalgError::Dimension(format!(
            "{} regressor rows vs {} response rows",
            x.nrows(),
            y.nrows()
        )));
    }
    if let Some(column) = first_collinear_column(x) {
        return Err(LinalgError::Collinear { column });
    }
    // QR keeps the conditioning of X rather than squaring it.
    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or(LinalgError::Collinear { column: 0 })?;
    let resid = y - x * &coef;
    let k = x.ncols();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(LinalgError::Collinear { column: 0 })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok(LeastSquares {
        coef,
        resid,
        xtx_inv,
    })
}

/// Builds a matrix from row-major nested vectors.
pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.is_square() && m.clone().cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DMatrix::from_column_slice(4, 1, &[1.0, 3.0, 5.0, 7.0]);
        let fit = least_squares(&x, &y).unwrap();
        assert!((fit.coef[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((fit.coef[(1, 0)] - 2.0).abs() < 1e-12);
        assert!(fit.resid.norm() < 1e-12);
    }

    #[test]
    fn duplicate_column_detected() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 2.0, 1.0, 5.0, 5.0, 1.0, 7.0, 7.0]);
        assert_eq!(first_collinear_column(&x), Some(2));
        let y = DMatrix::zeros(3, 1);
        assert_eq!(
            least_squares(&x, &y).unwrap_err(),
            LinalgError::Collinear { column: 2 }
        );
    }
}
