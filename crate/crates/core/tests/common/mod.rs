//! Reference implementations used as test oracles. Written from the
//! textbook definitions with scalar loops, independent of the library code.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod gradcheck;

pub type Rows = Vec<Vec<f64>>;

pub fn random_rows(n: usize, d: usize, rng: &mut impl rand::Rng) -> Rows {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn centering(n: usize) -> Rows {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64).collect())
        .collect()
}

fn mat_mul(a: &Rows, b: &Rows) -> Rows {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    (0..n).map(|i| (0..p).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

/// Biased HSIC from Gram matrices with an explicit centering matrix:
/// `tr(K H L H) / (n-1)^2`.
pub fn hsic(x: &Rows, y: &Rows) -> f64 {
    let n = x.len();
    let gram = |m: &Rows| -> Rows {
        (0..n).map(|i| (0..n).map(|j| m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum()).collect()).collect()
    };
    let h = centering(n);
    let khlh = mat_mul(&mat_mul(&mat_mul(&gram(x), &h), &gram(y)), &h);
    (0..n).map(|i| khlh[i][i]).sum::<f64>() / ((n - 1) as f64).powi(2)
}

pub fn cka(x: &Rows, y: &Rows) -> f64 {
    hsic(x, y) / (hsic(x, x) * hsic(y, y)).sqrt()
}

/// Brute force: all pairwise cosine similarities, full sort per row.
pub fn neighbor_sets(x: &Rows, k: usize) -> Vec<Vec<usize>> {
    let n = x.len();
    let norm = |v: &Vec<f64>| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let (ni, nj) = (norm(&x[i]), norm(&x[j]));
                    let dot: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
                    let cos = if ni == 0.0 || nj == 0.0 { 0.0 } else { dot / (ni * nj) };
                    (cos, j)
                })
                .collect();
            others.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let mut s: Vec<usize> = others.into_iter().take(k).map(|p| p.1).collect();
            s.sort();
            s
        })
        .collect()
}

pub fn knn_scores(x: &Rows, y: &Rows, k: usize) -> (f64, f64) {
    let (nx, ny) = (neighbor_sets(x, k), neighbor_sets(y, k));
    let mut mutual = 0.0;
    let mut jac = 0.0;
    for (a, b) in nx.iter().zip(&ny) {
        let inter = a.iter().filter(|v| b.contains(v)).count();
        let mut union: Vec<usize> = a.iter().chain(b).copied().collect();
        union.sort();
        union.dedup();
        mutual += inter as f64 / k as f64;
        jac += inter as f64 / union.len() as f64;
    }
    (mutual / x.len() as f64, jac / x.len() as f64)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Returns
/// eigenvalues descending with eigenvectors as columns.
pub fn sym_eigen(a: &Rows) -> (Vec<f64>, Rows) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Rows = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..200 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
                let (c, s) = (theta.cos(), theta.sin());
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&i| v[r][i]).collect()).collect();
    (vals, vecs)
}

fn covariance(a: &Rows, b: &Rows) -> Rows {
    let n = a.len();
    let mean = |m: &Rows, j: usize| m.iter().map(|r| r[j]).sum::<f64>() / n as f64;
    let (da, db) = (a[0].len(), b[0].len());
    let ma: Vec<f64> = (0..da).map(|j| mean(a, j)).collect();
    let mb: Vec<f64> = (0..db).map(|j| mean(b, j)).collect();
    (0..da)
        .map(|i| (0..db).map(|j| (0..n).map(|r| (a[r][i] - ma[i]) * (b[r][j] - mb[j])).sum::<f64>() / (n - 1) as f64).collect())
        .collect()
}

/// SVCCA through covariances: keep leading covariance eigenvectors up to the
/// variance threshold, whiten, then the canonical correlations are the square
/// roots of the eigenvalues of `MᵀM` with `M` the whitened cross-covariance.
pub fn svcca(x: &Rows, y: &Rows, threshold: f64) -> f64 {
    let reduce = |m: &Rows| -> (Rows, Vec<f64>) {
        let (vals, vecs) = sym_eigen(&covariance(m, m));
        let vals: Vec<f64> = vals.into_iter().map(|v| v.max(0.0)).collect();
        let total: f64 = vals.iter().filter(|&&v| v > vals[0] * 1e-20).sum();
        let mut acc = 0.0;
        let mut r = 0;
        for &v in &vals {
            if v <= vals[0] * 1e-20 {
                break;
            }
            acc += v;
            r += 1;
            if acc / total >= threshold - 1e-12 {
                break;
            }
        }
        let e: Rows = vecs.iter().map(|row| row[..r].to_vec()).collect();
        (e, vals[..r].to_vec())
    };
    let (ex, lx) = reduce(x);
    let (ey, ly) = reduce(y);
    let cxy = covariance(x, y);
    let (rx, ry) = (lx.len(), ly.len());
    // M = Λx^{-1/2} Exᵀ Cxy Ey Λy^{-1/2}
    let m: Rows = (0..rx)
        .map(|a| {
            (0..ry)
                .map(|b| {
                    let mut s = 0.0;
                    for i in 0..cxy.len() {
                        for j in 0..cxy[0].len() {
                            s += ex[i][a] * cxy[i][j] * ey[j][b];
                        }
                    }
                    s / (lx[a].sqrt() * ly[b].sqrt())
                })
                .collect()
        })
        .collect();
    let mtm: Rows = (0..ry).map(|i| (0..ry).map(|j| (0..rx).map(|k| m[k][i] * m[k][j]).sum()).collect()).collect();
    let (vals, _) = sym_eigen(&mtm);
    let r = rx.min(ry);
    vals[..r].iter().map(|v| v.max(0.0).sqrt().min(1.0)).sum::<f64>() / r as f64
}
