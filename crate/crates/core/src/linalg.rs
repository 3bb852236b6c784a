//! Small dense linear algebra: row-major matrices, Householder least
//! squares, one-sided Jacobi SVD and closed-form 2×2 symmetric eigen.

use crate::scalar::{dot, Scalar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is singular")]
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
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

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<T> {
        let mut mean = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (m, &x) in mean.iter_mut().zip(self.row(i)) {
                *m += x;
            }
        }
        let n = T::of(self.rows.max(1) as f64);
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Copy with `offset` subtracted from every row.
    pub fn centered(&self, offset: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for (x, &m) in out.row_mut(i).iter_mut().zip(offset) {
                *x -= m;
            }
        }
        out
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Least-squares solution of `A·β ≈ b` by Householder QR.
///
/// Returns `β`. Columns whose reflected diagonal falls below
/// `rank_tol · ‖A_j‖` are reported as rank deficient.
pub fn lstsq<T: Scalar>(a: &Matrix<T>, b: &[T], rank_tol: T) -> Result<Vec<T>, LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(LinalgError::Shape(format!("rhs has {} rows, matrix {m}", b.len())));
    }
    if m < n {
        return Err(LinalgError::RankDeficient { column: m });
    }
    let col_norms: Vec<T> = (0..n).map(|j| crate::scalar::norm(&a.column(j))).collect();
    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let mut v = vec![T::zero(); m];
    for j in 0..n {
        let sigma = (j..m).map(|i| r[(i, j)] * r[(i, j)]).sum::<T>().sqrt();
        if sigma <= rank_tol * col_norms[j] || sigma == T::zero() {
            return Err(LinalgError::RankDeficient { column: j });
        }
        let x0 = r[(j, j)];
        let alpha = if x0 >= T::zero() { -sigma } else { sigma };
        for i in j..m {
            v[i] = r[(i, j)];
        }
        v[j] -= alpha;
        let vnorm2: T = (j..m).map(|i| v[i] * v[i]).sum();
        if vnorm2 > T::zero() {
            let two = T::of(2.0);
            for k in j..n {
                let s: T = (j..m).map(|i| v[i] * r[(i, k)]).sum();
                let f = two * s / vnorm2;
                for i in j..m {
                    r[(i, k)] -= f * v[i];
                }
            }
            let s: T = (j..m).map(|i| v[i] * qtb[i]).sum();
            let f = two * s / vnorm2;
            for i in j..m {
                qtb[i] -= f * v[i];
            }
        }
    }
    let mut beta = vec![T::zero(); n];
    for j in (0..n).rev() {
        let s: T = (j + 1..n).map(|k| r[(j, k)] * beta[k]).sum();
        beta[j] = (qtb[j] - s) / r[(j, j)];
    }
    Ok(beta)
}

/// Thin SVD from one-sided Jacobi rotations.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// Singular values, one per column of the input, unsorted.
    pub singular: Vec<T>,
    /// Right singular vectors as columns (`cols × cols`, orthogonal).
    pub v: Matrix<T>,
    pub sweeps: usize,
}

/// One-sided (Hestenes) Jacobi SVD of an `m × n` matrix.
///
/// Orthogonalizes the columns of `a` by plane rotations accumulated into `V`;
/// the final column norms are the singular values.
pub fn jacobi_svd<T: Scalar>(a: &Matrix<T>) -> Svd<T> {
    const MAX_SWEEPS: usize = 80;
    let (m, n) = (a.rows(), a.cols());
    // Column-major working copy.
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let tol = T::epsilon() * T::of(m.max(1) as f64).sqrt();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let singular = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut vm = Matrix::zeros(n, n);
    for (j, col) in v.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            vm[(i, j)] = x;
        }
    }
    Svd {
        singular,
        v: vm,
        sweeps,
    }
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

/// Eigen-decomposition of the symmetric matrix `[[a, b], [b, d]]`.
///
/// Returns `(λ_major, λ_minor, θ)` where `θ ∈ [0, π)` is the angle of the
/// major eigenvector from the first axis.
pub fn sym2_eigen<T: Scalar>(a: T, b: T, d: T) -> (T, T, T) {
    let half = T::of(0.5);
    let mean = (a + d) * half;
    let r = (((a - d) * half).powi(2) + b * b).sqrt();
    let mut theta = half * (T::of(2.0) * b).atan2(a - d);
    let pi = T::of(std::f64::consts::PI);
    if theta < T::zero() {
        theta += pi;
    }
    if theta >= pi {
        theta -= pi;
    }
    (mean + r, mean - r, theta)
}

/// Solves `A·X = B` for a small square `A` by Gaussian elimination with
/// partial pivoting.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(LinalgError::Shape("solve needs square A and matching B".into()));
    }
    let mut a = a.clone();
    let mut x = b.clone();
    let scale = a.as_slice().iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).unwrap())
            .unwrap_or(k);
        if a[(piv, k)].abs() <= T::epsilon() * scale * T::of(n as f64) {
            return Err(LinalgError::Singular);
        }
        if piv != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            for j in 0..x.cols() {
                let t = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = t;
            }
        }
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..n {
                let t = a[(k, j)];
                a[(i, j)] -= f * t;
            }
            for j in 0..x.cols() {
                let t = x[(k, j)];
                x[(i, j)] -= f * t;
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..x.cols() {
            let mut s = x[(k, j)];
            for i in k + 1..n {
                s -= a[(k, i)] * x[(i, j)];
            }
            x[(k, j)] = s / a[(k, k)];
        }
    }
    Ok(x)
}
