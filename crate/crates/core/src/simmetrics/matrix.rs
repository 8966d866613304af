use std::fmt;

use super::SimError;

/// Dense row-major `f64` matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// `n` probe inputs by `d` features.
pub type RepresentationMatrix = Matrix;
/// Symmetric `n x n` matrix of pairwise inner products.
pub type KernelMatrix = Matrix;

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SimError> {
        if data.len() != rows * cols {
            return Err(SimError::Shape(format!("{rows}x{cols} matrix needs {} values, got {}", rows * cols, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SimError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SimError::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Result<Self, SimError> {
        Self::new(rows, cols, data.iter().map(|&v| v as f64).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Self, SimError> {
        if self.cols != other.rows {
            return Err(SimError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                        *d += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Subtracts each column's mean.
    pub fn center_columns(&self) -> Self {
        let mut out = self.clone();
        let n = self.rows as f64;
        for j in 0..self.cols {
            let mean = (0..self.rows).map(|i| self[(i, j)]).sum::<f64>() / n;
            for i in 0..self.rows {
                out[(i, j)] -= mean;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// `K = X Xᵀ`.
pub fn gram(x: &Matrix) -> KernelMatrix {
    let n = x.rows;
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_of_identity() {
        assert_eq!(gram(&Matrix::identity(3)), Matrix::identity(3));
    }

    #[test]
    fn gram_duplicate_rows() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![1.0, 2.0]]).unwrap();
        let k = gram(&x);
        assert_eq!(k.row(0), k.row(2));
    }

    #[test]
    fn gram_matches_dot_products() {
        let x = Matrix::from_rows(&[vec![0.3, -1.2], vec![2.0, 0.7], vec![-0.4, 0.1], vec![1.5, 1.5]]).unwrap();
        let k = gram(&x);
        for i in 0..4 {
            for j in 0..4 {
                let dot = x[(i, 0)] * x[(j, 0)] + x[(i, 1)] * x[(j, 1)];
                assert!((k[(i, j)] - dot).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Matrix::new(2, 2, vec![0.0; 3]), Err(SimError::Shape(_))));
        assert!(matches!(Matrix::new(1, 2, vec![0.0, f64::NAN]), Err(SimError::NonFinite)));
    }

    #[test]
    fn matmul_and_transpose() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let p = a.matmul(&a.transpose()).unwrap();
        assert_eq!(p, Matrix::from_rows(&[vec![14.0, 32.0], vec![32.0, 77.0]]).unwrap());
        assert!(a.matmul(&a).is_err());
    }
}
