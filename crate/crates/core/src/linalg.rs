//! Small dense matrices and an LU solver with partial pivoting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
            return Err(Error::InvalidNetwork(format!(
                "ragged matrix: row {i} has {} entries, expected {c}",
                row.len()
            )));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column_sum(&self, j: usize) -> T {
        (0..self.rows).map(|i| self[(i, j)]).sum()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `PA = LU` of a square matrix, kept together with the
/// original matrix so solves can be refined against the true residual.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    factors: Vec<T>,
    perm: Vec<usize>,
    original: Matrix<T>,
}

const MAX_REFINEMENTS: usize = 4;

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        assert_eq!(a.rows(), a.cols(), "LU needs a square matrix");
        let n = a.rows();
        let mut f = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = f.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = T::epsilon() * T::from_usize_lossy(n.max(1)) * scale;

        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, f[i * n + k].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tiny || pivot == T::zero() {
                return Err(Error::SingularSystem {
                    column: k,
                    pivot: pivot.as_f64(),
                });
            }
            if p != k {
                for j in 0..n {
                    f.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let diag = f[k * n + k];
            for i in k + 1..n {
                let l = f[i * n + k] / diag;
                f[i * n + k] = l;
                if l != T::zero() {
                    for j in k + 1..n {
                        let u = f[k * n + j];
                        f[i * n + j] -= l * u;
                    }
                }
            }
        }
        Ok(Self {
            n,
            factors: f,
            perm,
            original: a.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn substitute(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let f = &self.factors;
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= f[i * n + j] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= f[i * n + j] * y[j];
            }
            y[i] = acc / f[i * n + i];
        }
        y
    }

    /// Solves `A x = b`, then applies iterative refinement until the
    /// relative residual drops below [`Scalar::refine_tol`].
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let mut x = self.substitute(b);
        let b_norm = b.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = T::refine_tol() * b_norm.max(T::min_positive_value());
        for _ in 0..MAX_REFINEMENTS {
            let ax = self.original.mul_vec(&x);
            let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
            let r_norm = r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if r_norm <= tol {
                break;
            }
            let dx = self.substitute(&r);
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
        }
        x
    }
}
