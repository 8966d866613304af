use super::matrix::Matrix;
use super::SimError;

/// Indices of the `k` most cosine-similar rows to each row, self excluded,
/// ties broken by lower index. Zero rows have similarity 0 to everything.
pub fn knn_sets(x: &Matrix, k: usize) -> Result<Vec<Vec<usize>>, SimError> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(SimError::InvalidK { k, rows: n });
    }
    let unit: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let r = x.row(i);
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                r.iter().map(|v| v / norm).collect()
            } else {
                vec![0.0; r.len()]
            }
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum(), j))
                .collect();
            cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut set: Vec<usize> = cand[..k].iter().map(|c| c.1).collect();
            set.sort_unstable();
            set
        })
        .collect())
}

fn intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

type NeighborSets = Vec<Vec<usize>>;

fn paired_sets(x: &Matrix, y: &Matrix, k: usize) -> Result<(NeighborSets, NeighborSets), SimError> {
    super::cka::check_pair(x, y, 2)?;
    Ok((knn_sets(x, k)?, knn_sets(y, k)?))
}

/// Mean over rows of `|N_X(i) ∩ N_Y(i)| / k`.
pub fn mutual_knn(x: &Matrix, y: &Matrix, k: usize) -> Result<f64, SimError> {
    let (nx, ny) = paired_sets(x, y, k)?;
    let total: usize = nx.iter().zip(&ny).map(|(a, b)| intersection(a, b)).sum();
    Ok(total as f64 / (k * nx.len()) as f64)
}

/// Mean over rows of `|N_X(i) ∩ N_Y(i)| / |N_X(i) ∪ N_Y(i)|`.
pub fn knn_jaccard(x: &Matrix, y: &Matrix, k: usize) -> Result<f64, SimError> {
    let (nx, ny) = paired_sets(x, y, k)?;
    let total: f64 = nx
        .iter()
        .zip(&ny)
        .map(|(a, b)| {
            let inter = intersection(a, b);
            inter as f64 / (2 * k - inter) as f64
        })
        .sum();
    Ok(total / nx.len() as f64)
}
