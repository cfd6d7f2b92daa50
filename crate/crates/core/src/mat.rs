//! Small dense square matrices and vector helpers.
//!
//! Group elements live in dimension n <= 4, so a row-major `Vec<f64>` beats a
//! general linear algebra type in the hot interpolation loops.

use nalgebra::{DMatrix, SymmetricEigen};

/// Row-major n x n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Mat { n, data }
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data has wrong length");
        Mat { n, data }
    }

    /// Householder matrix I - 2 eta eta^T.
    pub fn householder(normal: &[f64]) -> Self {
        let n = normal.len();
        let mut m = Mat::identity(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] -= 2.0 * normal[i] * normal[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Mat { n, data }
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Mat { n, data }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Max-abs entrywise distance.
    pub fn dist(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Vec<f64> {
    let eig = SymmetricEigen::new(m.to_nalgebra());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    let r = norm(a);
    a.iter().map(|x| x / r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn householder_is_involution() {
        let eta = normalized(&[1.0, 2.0, -0.5]);
        let h = Mat::householder(&eta);
        assert!(h.mul(&h).dist(&Mat::identity(3)) < 1e-14);
        assert!((h.trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_sorted() {
        let m = Mat::from_rows(2, vec![2.0, 1.0, 1.0, 2.0]);
        let ev = symmetric_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}
