//! Small dense square matrices on the stack, sized for embeddings up to 8×8.

use nalgebra::DMatrix;
use std::ops::{Index, IndexMut};

pub const MAX_DIM: usize = 8;
const STRIDE: usize = MAX_DIM;

#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    dim: usize,
    data: [f64; MAX_DIM * MAX_DIM],
}

impl std::fmt::Debug for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)]).collect())
            .collect();
        write!(f, "Mat{:?}", rows)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.dim && j < self.dim);
        &self.data[i * STRIDE + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.dim && j < self.dim);
        &mut self.data[i * STRIDE + j]
    }
}

impl Mat {
    pub fn zeros(dim: usize) -> Mat {
        assert!((1..=MAX_DIM).contains(&dim), "matrix dimension {dim} out of range");
        Mat { dim, data: [0.0; MAX_DIM * MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Mat {
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from a row-major slice of length dim².
    pub fn from_row_major(dim: usize, values: &[f64]) -> Mat {
        assert_eq!(values.len(), dim * dim);
        let mut m = Mat::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = values[i * dim + j];
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Mat {
        let dim = rows.len();
        let mut m = Mat::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transpose(&self) -> Mat {
        let mut m = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m.data[i * STRIDE + j] += a * other.data[k * STRIDE + j];
                }
            }
        }
        m
    }

    /// self · otherᵀ
    pub fn mul_transpose(&self, other: &Mat) -> Mat {
        let n = self.dim;
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self[(i, k)] * other[(j, k)];
                }
                m[(i, j)] = acc;
            }
        }
        m
    }

    /// selfᵀ · other
    pub fn transpose_mul(&self, other: &Mat) -> Mat {
        let n = self.dim;
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self[(k, i)] * other[(k, j)];
                }
                m[(i, j)] = acc;
            }
        }
        m
    }

    /// t · x · tᵀ
    pub fn congruence(&self, x: &Mat) -> Mat {
        self.mul(x).mul_transpose(self)
    }

    pub fn add(&self, other: &Mat) -> Mat {
        let mut m = *self;
        for (a, b) in m.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
        m
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        let mut m = *self;
        for (a, b) in m.data.iter_mut().zip(other.data.iter()) {
            *a -= *b;
        }
        m
    }

    pub fn scale(&self, c: f64) -> Mat {
        let mut m = *self;
        for a in m.data.iter_mut() {
            *a *= c;
        }
        m
    }

    /// Frobenius inner product Σ a_ij b_ij.
    pub fn frobenius_dot(&self, other: &Mat) -> f64 {
        self.data.iter().zip(other.data.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrized(&self) -> Mat {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Inverse of an upper triangular matrix by back substitution.
    pub fn upper_triangular_inverse(&self) -> Mat {
        let n = self.dim;
        let mut inv = Mat::zeros(n);
        for col in 0..n {
            for i in (0..=col).rev() {
                let mut acc = if i == col { 1.0 } else { 0.0 };
                for k in (i + 1)..=col {
                    acc -= self[(i, k)] * inv[(k, col)];
                }
                inv[(i, col)] = acc / self[(i, i)];
            }
        }
        inv
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Mat {
        assert_eq!(m.nrows(), m.ncols());
        let mut out = Mat::zeros(m.nrows());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }

    /// Eigenvalues of a symmetric matrix, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.symmetrized().to_dmatrix());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    pub fn inverse(&self) -> Option<Mat> {
        self.to_dmatrix().try_inverse().map(|m| Mat::from_dmatrix(&m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_inverse_round_trip() {
        let t = Mat::from_rows(&[&[2.0, 1.0, -3.0], &[0.0, 0.5, 4.0], &[0.0, 0.0, 3.0]]);
        let prod = t.mul(&t.upper_triangular_inverse());
        assert!(prod.sub(&Mat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn products_agree() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Mat::from_rows(&[&[0.5, -1.0], &[2.0, 1.5]]);
        assert_eq!(a.mul_transpose(&b), a.mul(&b.transpose()));
        assert_eq!(a.transpose_mul(&b), a.transpose().mul(&b));
        assert_eq!(a.frobenius_dot(&b), 0.5 - 2.0 + 6.0 + 6.0);
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let d = Mat::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(d.symmetric_eigenvalues(), vec![1.0, 3.0]);
    }
}
