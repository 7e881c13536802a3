//! Small dense complex linear algebra.
//!
//! Only what the precoding and Neumann pipelines need: products, adjoints,
//! the Gram matrix `HH^H`, a Cholesky-based inverse for Hermitian positive
//! definite matrices and a pivoted Gauss-Jordan inverse for everything else.
//! Dimensions are tiny (`L <= 8` on the inverse side), so nothing here is
//! blocked or vectorized.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Relative pivot threshold for both inverses.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

/// `e^{j phase}`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    let (s, c) = libm::sincos(phase);
    C64::new(c, s)
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6e}{:+.6e}j ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        ComplexMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("matrix dimensions must be >= 1"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch("entry count must equal rows * cols"));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Stacks equal-length rows.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::DimensionMismatch("rows have different lengths"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::from_vec(rows.len(), cols, data)
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
    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// # Panics
    /// On inner-dimension mismatch.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.frobenius_norm_sq())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry modulus of `self - other`.
    ///
    /// # Panics
    /// On shape mismatch.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (i..self.cols).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol))
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        self.off_diagonal_max_abs() == 0.0
    }

    pub fn off_diagonal_max_abs(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    worst = worst.max(self[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// Real parts of the diagonal.
    pub fn diagonal_re(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// `HH^H`. The result is exactly Hermitian (the lower triangle is mirrored
/// from the upper one) with a real diagonal.
pub fn gram(h: &ComplexMatrix) -> ComplexMatrix {
    let l = h.rows();
    let mut g = ComplexMatrix::zeros(l, l);
    for i in 0..l {
        let ri = h.row(i);
        g[(i, i)] = C64::new(ri.iter().map(|z| z.norm_sqr()).sum(), 0.0);
        for j in i + 1..l {
            let v: C64 = ri.iter().zip(h.row(j)).map(|(a, b)| a * b.conj()).sum();
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// Inverse of a Hermitian positive definite matrix through `A = LL^H`.
///
/// Fails with [`Error::SingularMatrix`] when a Cholesky pivot (before the
/// square root) drops below `PIVOT_TOLERANCE * max|A_ij|`.
pub fn hermitian_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("hermitian_inverse needs a square matrix"));
    }
    let n = a.rows();
    let threshold = PIVOT_TOLERANCE * a.max_abs();

    let mut chol = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let pivot = a[(k, k)].re - (0..k).map(|j| chol[(k, j)].norm_sqr()).sum::<f64>();
        if !(pivot > threshold) {
            return Err(Error::SingularMatrix {
                index: k,
                pivot,
                threshold,
            });
        }
        let lkk = libm::sqrt(pivot);
        chol[(k, k)] = C64::new(lkk, 0.0);
        for i in k + 1..n {
            let s: C64 = (0..k).map(|j| chol[(i, j)] * chol[(k, j)].conj()).sum();
            chol[(i, k)] = (a[(i, k)] - s) / lkk;
        }
    }

    // Forward substitution for L^{-1}, which is lower triangular.
    let mut linv = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = C64::new(1.0 / chol[(j, j)].re, 0.0);
        for i in j + 1..n {
            let s: C64 = (j..i).map(|k| chol[(i, k)] * linv[(k, j)]).sum();
            linv[(i, j)] = -s / chol[(i, i)].re;
        }
    }

    // A^{-1} = L^{-H} L^{-1}
    let mut inv = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let d: f64 = (i..n).map(|k| linv[(k, i)].norm_sqr()).sum();
        inv[(i, i)] = C64::new(d, 0.0);
        for j in i + 1..n {
            let v: C64 = (j..n).map(|k| linv[(k, i)].conj() * linv[(k, j)]).sum();
            inv[(i, j)] = v;
            inv[(j, i)] = v.conj();
        }
    }
    Ok(inv)
}

/// General square inverse by Gauss-Jordan elimination with partial pivoting.
///
/// Used where the operand need not be positive definite, e.g. a divergent
/// Neumann approximation.
pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("inverse needs a square matrix"));
    }
    let n = a.rows();
    let threshold = PIVOT_TOLERANCE * a.max_abs();
    let mut work = a.clone();
    let mut inv = ComplexMatrix::identity(n);

    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, work[(r, col)].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_abs > threshold) {
            return Err(Error::SingularMatrix {
                index: col,
                pivot: pivot_abs,
                threshold,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                work.data.swap(col * n + j, pivot_row * n + j);
                inv.data.swap(col * n + j, pivot_row * n + j);
            }
        }
        let p = work[(col, col)].inv();
        for j in 0..n {
            work[(col, j)] *= p;
            inv[(col, j)] *= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[(r, col)];
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let wc = work[(col, j)];
                let ic = inv[(col, j)];
                work[(r, j)] -= f * wc;
                inv[(r, j)] -= f * ic;
            }
        }
    }
    Ok(inv)
}

/// Kronecker product of two row vectors: `out[i * b.len() + k] = a[i] * b[k]`.
pub fn kron_row(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// `Tr[AB]` for square `A`, `B` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    assert_eq!(a.cols(), b.rows());
    assert_eq!(a.rows(), b.cols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.rows() {
        for (k, &x) in a.row(i).iter().enumerate() {
            acc += x * b[(k, i)];
        }
    }
    acc
}
