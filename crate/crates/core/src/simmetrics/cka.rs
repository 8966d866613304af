use super::matrix::Matrix;
use super::SimError;

/// Linear CKA with the biased HSIC estimator. Computed in feature space:
/// with column-centered `X` and `Y`, `HSIC(K, L) ∝ ‖XᵀY‖²_F`.
pub fn linear_cka(x: &Matrix, y: &Matrix) -> Result<f64, SimError> {
    check_pair(x, y, 3)?;
    let xc = centered_nondegenerate(x, "X")?;
    let yc = centered_nondegenerate(y, "Y")?;
    let xy = cross_norm_sq(&xc, &yc);
    let xx = cross_norm_sq(&xc, &xc);
    let yy = cross_norm_sq(&yc, &yc);
    Ok(xy / (xx.sqrt() * yy.sqrt()))
}

pub(crate) fn check_pair(x: &Matrix, y: &Matrix, min_rows: usize) -> Result<(), SimError> {
    if x.rows() != y.rows() {
        return Err(SimError::Shape(format!("row counts differ: {} vs {}", x.rows(), y.rows())));
    }
    if x.rows() < min_rows {
        return Err(SimError::TooFewRows { rows: x.rows(), needed: min_rows });
    }
    Ok(())
}

/// Column-centers `m`, rejecting inputs whose rows are all (numerically) equal.
pub(crate) fn centered_nondegenerate(m: &Matrix, name: &str) -> Result<Matrix, SimError> {
    let c = m.center_columns();
    let scale = m.frobenius_norm();
    if scale == 0.0 || c.frobenius_norm() <= 1e-12 * scale {
        return Err(SimError::Degenerate(format!("{name} has no variance across rows")));
    }
    Ok(c)
}

/// `‖AᵀB‖²_F` for equal-row matrices.
fn cross_norm_sq(a: &Matrix, b: &Matrix) -> f64 {
    let mut total = 0.0;
    for i in 0..a.cols() {
        for j in 0..b.cols() {
            let mut dot = 0.0;
            for r in 0..a.rows() {
                dot += a[(r, i)] * b[(r, j)];
            }
            total += dot * dot;
        }
    }
    total
}
