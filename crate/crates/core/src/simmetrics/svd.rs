use super::matrix::Matrix;
use super::SimError;

const TOLERANCE: f64 = 1e-12;

/// Thin singular value decomposition `M = U diag(s) Vᵀ` with `k = min(m, n)`
/// columns in `U` and `V`; `s` is non-negative and descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi SVD. Sweeps are capped at `100 * max(m, n)`.
pub fn svd(m: &Matrix) -> Result<Svd, SimError> {
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite);
    }
    if m.rows() < m.cols() {
        let t = svd_tall(&m.transpose())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    svd_tall(m)
}

fn svd_tall(a: &Matrix) -> Result<Svd, SimError> {
    let (m, n) = (a.rows(), a.cols());
    // column-major working copies
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| f64::from(u8::from(i == j))).collect()).collect();
    let max_sweeps = 100 * m.max(n).max(1);
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SimError::NoConvergence { sweeps: max_sweeps });
    }

    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let scale = norms.iter().copied().fold(0.0, f64::max);
    let cutoff = scale * (m.max(n) as f64) * f64::EPSILON;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut v_out = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        if sigma > cutoff {
            s.push(sigma);
            u_cols.push(cols[j].iter().map(|x| x / sigma).collect());
        } else {
            s.push(0.0);
            u_cols.push(Vec::new());
        }
        for i in 0..n {
            v_out[(i, k)] = v[j][i];
        }
    }
    complete_basis(&mut u_cols, m);
    let mut u = Matrix::zeros(m, n);
    for (k, col) in u_cols.iter().enumerate() {
        for i in 0..m {
            u[(i, k)] = col[i];
        }
    }
    Ok(Svd { u, s, v: v_out })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills empty columns with unit vectors orthogonal to the rest, by
/// Gram-Schmidt over the standard basis.
fn complete_basis(cols: &mut [Vec<f64>], m: usize) {
    let mut candidate = 0;
    for k in 0..cols.len() {
        if !cols[k].is_empty() {
            continue;
        }
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for other in cols.iter().filter(|c| !c.is_empty()) {
                    let d: f64 = other.iter().zip(&e).map(|(a, b)| a * b).sum();
                    for (x, o) in e.iter_mut().zip(other) {
                        *x -= d * o;
                    }
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                cols[k] = e.into_iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}
