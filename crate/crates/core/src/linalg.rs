//! Small dense linear algebra: row-major matrices, LU with partial pivoting,
//! one-sided Jacobi SVD (for minimum-norm least squares and null spaces) and
//! Lawson–Hanson nonnegative least squares.
//!
//! Problem sizes in this crate are a few dozen rows at most, so everything is
//! dense and allocation-happy.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm_inf, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from a list of rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `A v`
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ v`
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Submatrix with the given row and column indices (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn max_abs(&self) -> T {
        norm_inf(&self.data)
    }

    pub fn min_entry(&self) -> Option<T> {
        self.data.iter().copied().reduce(T::min)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == T::zero())
    }

    /// `E − A` for square `A`.
    pub fn identity_minus(&self) -> Self {
        debug_assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            let e = if i == j { T::one() } else { T::zero() };
            e - self[(i, j)]
        })
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::lit(x.to_f64_lossy())).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    /// Returns `None` when a pivot falls below `n·ε·max|a_ij|`, i.e. the
    /// matrix is numerically singular.
    pub fn factor(a: &Matrix<T>) -> Option<Self> {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let thresh = T::epsilon() * T::from_usize_lossy(n.max(1)) * a.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= thresh {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - f * lu[(k, j)];
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.perm.len();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ` computed with
/// one-sided (Hestenes) Jacobi rotations. Matrices with fewer rows than
/// columns are padded with zero rows, so `v` is always a full `n×n`
/// orthogonal matrix and the null space can be read off it.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    rows: usize,
    u: Matrix<T>,
    s: Vec<T>,
    v: Matrix<T>,
}

impl<T: Scalar> Svd<T> {
    const MAX_SWEEPS: usize = 80;

    pub fn new(a: &Matrix<T>) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mm = m.max(n);
        let mut u = Matrix::from_fn(mm, n, |i, j| if i < m { a[(i, j)] } else { T::zero() });
        let mut v = Matrix::identity(n);
        let eps = T::epsilon();
        let two = T::lit(2.0);

        for _ in 0..Self::MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                    for i in 0..mm {
                        let (up, uq) = (u[(i, p)], u[(i, q)]);
                        alpha = alpha + up * up;
                        beta = beta + uq * uq;
                        gamma = gamma + up * uq;
                    }
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (two * gamma);
                    let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                    let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..mm {
                        let (up, uq) = (u[(i, p)], u[(i, q)]);
                        u[(i, p)] = c * up - s * uq;
                        u[(i, q)] = s * up + c * uq;
                    }
                    for i in 0..n {
                        let (vp, vq) = (v[(i, p)], v[(i, q)]);
                        v[(i, p)] = c * vp - s * vq;
                        v[(i, q)] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }

        let mut s = vec![T::zero(); n];
        for (j, sj) in s.iter_mut().enumerate() {
            let norm = (0..mm).map(|i| u[(i, j)] * u[(i, j)]).sum::<T>().sqrt();
            *sj = norm;
            if norm > T::zero() {
                for i in 0..mm {
                    u[(i, j)] = u[(i, j)] / norm;
                }
            }
        }
        Self { rows: m, u, s, v }
    }

    pub fn singular_values(&self) -> &[T] {
        &self.s
    }

    fn threshold(&self, rcond: Option<T>) -> T {
        let smax = self.s.iter().copied().fold(T::zero(), T::max);
        let n = self.rows.max(self.s.len()).max(1);
        let rc = rcond.unwrap_or_else(|| T::epsilon() * T::from_usize_lossy(n) * T::lit(4.0));
        rc * smax
    }

    pub fn rank(&self, rcond: Option<T>) -> usize {
        let thr = self.threshold(rcond);
        self.s.iter().filter(|&&s| s > thr).count()
    }

    /// Minimum-norm least-squares solution `A⁺ b`.
    pub fn solve(&self, b: &[T], rcond: Option<T>) -> Vec<T> {
        debug_assert_eq!(b.len(), self.rows);
        let thr = self.threshold(rcond);
        let n = self.s.len();
        let mut x = vec![T::zero(); n];
        for j in 0..n {
            if self.s[j] <= thr {
                continue;
            }
            let coef = (0..self.rows).map(|i| self.u[(i, j)] * b[i]).sum::<T>() / self.s[j];
            for i in 0..n {
                x[i] = x[i] + coef * self.v[(i, j)];
            }
        }
        x
    }

    /// Orthonormal basis of the null space, one vector per entry.
    pub fn null_space(&self, rcond: Option<T>) -> Vec<Vec<T>> {
        let thr = self.threshold(rcond);
        (0..self.s.len())
            .filter(|&j| self.s[j] <= thr)
            .map(|j| self.v.column(j))
            .collect()
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
pub fn lstsq<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Vec<T> {
    Svd::new(a).solve(b, None)
}

pub fn residual_norm<T: Scalar>(a: &Matrix<T>, x: &[T], b: &[T]) -> T {
    a.mul_vec(x).iter().zip(b).map(|(&ax, &bi)| (ax - bi) * (ax - bi)).sum::<T>().sqrt()
}

#[derive(Clone, Debug)]
pub struct NnlsSolution<T> {
    pub x: Vec<T>,
    /// Euclidean norm of `A x − b`.
    pub residual: T,
}

/// Lawson–Hanson active-set solver for `min ‖A x − b‖₂` subject to `x ≥ 0`.
pub fn nnls<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<NnlsSolution<T>> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::Dimension(format!("rhs has length {}, matrix has {m} rows", b.len())));
    }
    let max_iter = (5 * n).max(100);
    let col_norm_max = (0..n)
        .map(|j| (0..m).map(|i| a[(i, j)].abs()).sum::<T>())
        .fold(T::zero(), T::max);
    let tol = T::lit(10.0) * T::epsilon() * col_norm_max.max(T::one()) * T::from_usize_lossy(m.max(n)) * norm_inf(b).max(T::one());

    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let gradient = |x: &[T]| -> Vec<T> {
        let r: Vec<T> = b.iter().zip(a.mul_vec(x)).map(|(&bi, ax)| bi - ax).collect();
        a.tr_mul_vec(&r)
    };
    let solve_passive = |passive: &[bool]| -> Vec<T> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let rows: Vec<usize> = (0..m).collect();
        let sub = a.select(&rows, &idx);
        let sp = lstsq(&sub, b);
        let mut s = vec![T::zero(); n];
        for (k, &j) in idx.iter().enumerate() {
            s[j] = sp[k];
        }
        s
    };

    let mut iter = 0;
    // Columns whose admission failed from rounding; retried after the next update.
    let mut blocked = vec![false; n];
    loop {
        let w = gradient(&x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !blocked[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(j) = candidate else { break };
        passive[j] = true;

        let mut s = solve_passive(&passive);
        if s[j] <= T::zero() {
            passive[j] = false;
            blocked[j] = true;
            continue;
        }
        blocked.iter_mut().for_each(|b| *b = false);
        loop {
            iter += 1;
            if iter > max_iter {
                return Err(Error::Convergence { what: "nonnegative least squares", iterations: max_iter });
            }
            if (0..n).all(|i| !passive[i] || s[i] > T::zero()) {
                break;
            }
            let mut step = T::one();
            for i in 0..n {
                if passive[i] && s[i] <= T::zero() {
                    let denom = x[i] - s[i];
                    if denom > T::zero() {
                        step = step.min(x[i] / denom);
                    }
                }
            }
            for i in 0..n {
                x[i] = x[i] + step * (s[i] - x[i]);
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = T::zero();
                }
            }
            s = solve_passive(&passive);
        }
        x = s;
        iter += 1;
        if iter > max_iter {
            return Err(Error::Convergence { what: "nonnegative least squares", iterations: max_iter });
        }
    }
    let residual = residual_norm(a, &x, b);
    Ok(NnlsSolution { x, residual })
}
