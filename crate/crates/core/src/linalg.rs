//! Minimal dense matrix support.
//!
//! The dimensions that appear here are tiny (series components, VAR regressor
//! counts), so the classical dense algorithms below are a better fit than a
//! linear-algebra dependency: cyclic Jacobi for symmetric eigenproblems,
//! Householder QR for least squares, Gauss-Jordan with partial pivoting for
//! inverses.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    /// Builds from row-major data; `data.len()` must equal `rows*cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    left: r.len(),
                    right: cols,
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn transpose(&self) -> Mat<F> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> F {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> F {
        self.data
            .iter()
            .fold(F::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self, context: &'static str) -> Result<Mat<F>> {
        assert_eq!(self.rows, self.cols, "inverse needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        let scale = self.max_abs().max(F::one());
        let tiny = F::from_f64(1e-13) * scale;
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            if a[(piv, col)].abs() <= tiny {
                return Err(Error::SingularMatrix { context });
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] = a[(col, j)] / d;
                inv[(col, j)] = inv[(col, j)] / d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == F::zero() {
                    continue;
                }
                for j in 0..n {
                    let s = a[(col, j)];
                    let t = inv[(col, j)];
                    a[(r, j)] = a[(r, j)] - f * s;
                    inv[(r, j)] = inv[(r, j)] - f * t;
                }
            }
        }
        Ok(inv)
    }

    /// Natural log of the determinant of a symmetric positive definite
    /// matrix via Cholesky; `None` when the matrix is not positive definite.
    pub fn sym_log_det(&self) -> Option<F> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = vec![F::zero(); n * n];
        let two = F::one() + F::one();
        let mut log_det = F::zero();
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= F::zero() {
                        return None;
                    }
                    let d = s.sqrt();
                    l[i * n + i] = d;
                    log_det += two * d.ln();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(log_det)
    }

    /// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
    /// Returns (eigenvalues, eigenvectors-as-columns), unsorted.
    pub fn sym_eigen(&self) -> (Vec<F>, Mat<F>) {
        assert_eq!(self.rows, self.cols, "sym_eigen needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut v = Mat::identity(n);
        let eps = F::from_f64(1e-14);
        let two = F::one() + F::one();
        for _sweep in 0..64 {
            let mut off = F::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off.sqrt() <= eps * a.max_abs().max(F::one()) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == F::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                    // Stable rotation: t = sign(theta) / (|theta| + sqrt(1+theta^2)).
                    let t = {
                        let at = theta.abs();
                        let r = at + (F::one() + at * at).sqrt();
                        if theta < F::zero() {
                            -(F::one() / r)
                        } else {
                            F::one() / r
                        }
                    };
                    let c = F::one() / (F::one() + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let eig = (0..n).map(|i| a[(i, i)]).collect();
        (eig, v)
    }
}

impl<F> std::ops::Index<(usize, usize)> for Mat<F> {
    type Output = F;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for Mat<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

/// Least-squares solve of `a x = b` (per column of `b`) by Householder QR.
/// Errors when the regressor matrix is numerically rank deficient.
pub fn qr_least_squares<F: Scalar>(a: &Mat<F>, b: &Mat<F>, context: &'static str) -> Result<Mat<F>> {
    let m = a.n_rows();
    let k = a.n_cols();
    assert_eq!(b.n_rows(), m, "rhs row count must match");
    if m < k {
        return Err(Error::TooFewObservations { need: k, got: m });
    }
    let mut r = a.clone();
    let mut y = b.clone();
    let nc = b.n_cols();
    let scale = a.max_abs().max(F::one());
    for col in 0..k {
        // Householder vector for column col, rows col..m.
        let mut norm = F::zero();
        for i in col..m {
            norm += r[(i, col)] * r[(i, col)];
        }
        let norm = norm.sqrt();
        if norm <= F::from_f64(1e-12) * scale {
            return Err(Error::SingularMatrix { context });
        }
        let alpha = if r[(col, col)] >= F::zero() {
            -norm
        } else {
            norm
        };
        let mut v = vec![F::zero(); m - col];
        v[0] = r[(col, col)] - alpha;
        for i in col + 1..m {
            v[i - col] = r[(i, col)];
        }
        let vtv: F = v.iter().map(|&x| x * x).sum();
        if vtv > F::zero() {
            let two = F::one() + F::one();
            for j in col..k {
                let mut dot = F::zero();
                for i in col..m {
                    dot += v[i - col] * r[(i, j)];
                }
                let f = two * dot / vtv;
                for i in col..m {
                    r[(i, j)] = r[(i, j)] - f * v[i - col];
                }
            }
            for j in 0..nc {
                let mut dot = F::zero();
                for i in col..m {
                    dot += v[i - col] * y[(i, j)];
                }
                let f = two * dot / vtv;
                for i in col..m {
                    y[(i, j)] = y[(i, j)] - f * v[i - col];
                }
            }
        }
        r[(col, col)] = alpha;
    }
    // Back substitution on the k x k upper triangle.
    let mut x = Mat::zeros(k, nc);
    for j in 0..nc {
        for i in (0..k).rev() {
            let mut s = y[(i, j)];
            for l in i + 1..k {
                s = s - r[(i, l)] * x[(l, j)];
            }
            if r[(i, i)].abs() <= F::from_f64(1e-12) * scale {
                return Err(Error::SingularMatrix { context });
            }
            x[(i, j)] = s / r[(i, i)];
        }
    }
    Ok(x)
}
