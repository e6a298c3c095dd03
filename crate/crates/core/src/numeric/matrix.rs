//! Row-major dense matrices and the matmul kernels everything else is built on.
//!
//! All three kernels (`matmul`, `matmul_nt`, `matmul_tn`) accumulate every
//! output element in increasing `k` order, so results are bit-reproducible
//! whether or not the row-parallel path is taken.

use std::fmt::Debug;
use std::ops::{Index, IndexMut};

use num_traits::Float;
use rayon::prelude::*;

use super::flops;
use crate::error::{Error, Result};

/// Element type for [`Matrix`]. `f64` is the default everywhere; `f32` exists
/// for latency benchmarks.
pub trait Scalar: Float + Debug + Send + Sync + Default + 'static {
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
    fn erf(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn erf(self) -> Self {
        libm::erf(self)
    }
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

/// Work (multiply-adds) below which kernels stay on the calling thread.
const PAR_THRESHOLD: usize = 1 << 18;

#[derive(Clone, PartialEq)]
pub struct Matrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Debug for Matrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            for r in 0..self.rows {
                write!(f, "\n  {:?}", self.row(r))?;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Like [`Matrix::new`] but also rejects NaN and infinities.
    pub fn new_checked(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Self::new(rows, cols, data)
    }

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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<T> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x = *x * s);
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "sub")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let w = end - start;
        let mut out = Self::zeros(self.rows, w);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[start..end]);
        }
        out
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_range(&self, start: usize, end: usize) -> Self {
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Write `src` into columns starting at `start`.
    pub fn set_columns(&mut self, start: usize, src: &Self) {
        assert_eq!(src.rows, self.rows);
        for r in 0..self.rows {
            self.row_mut(r)[start..start + src.cols].copy_from_slice(src.row(r));
        }
    }

    /// Add `src` into columns starting at `start`.
    pub fn add_columns(&mut self, start: usize, src: &Self) {
        assert_eq!(src.rows, self.rows);
        for r in 0..self.rows {
            let dst = &mut self.row_mut(r)[start..start + src.cols];
            for (d, &s) in dst.iter_mut().zip(src.row(r)) {
                *d = *d + s;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| U::from_f64(x.as_f64())).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    fn check_same(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
fn axpy<T: Scalar>(out: &mut [T], a: T, x: &[T]) {
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = *o + a * xi;
    }
}

#[inline]
fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// `a · b`.
pub fn matmul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols != b.rows {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    flops::record(2 * (m * k * n) as u64);
    let mut out = Matrix::zeros(m, n);
    if n == 0 {
        return Ok(out);
    }
    let row_kernel = |(i, c_row): (usize, &mut [T])| {
        let a_row = a.row(i);
        for (p, &a_ip) in a_row.iter().enumerate() {
            axpy(c_row, a_ip, b.row(p));
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        out.data.par_chunks_mut(n).enumerate().for_each(row_kernel);
    } else {
        out.data.chunks_mut(n).enumerate().for_each(row_kernel);
    }
    Ok(out)
}

/// `a · bᵀ`.
pub fn matmul_nt<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.cols != b.cols {
        return Err(Error::ShapeMismatch {
            op: "matmul_nt",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let (m, k, n) = (a.rows, a.cols, b.rows);
    flops::record(2 * (m * k * n) as u64);
    let mut out = Matrix::zeros(m, n);
    if n == 0 {
        return Ok(out);
    }
    let row_kernel = |(i, c_row): (usize, &mut [T])| {
        let a_row = a.row(i);
        for (j, c) in c_row.iter_mut().enumerate() {
            *c = dot(a_row, b.row(j));
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        out.data.par_chunks_mut(n).enumerate().for_each(row_kernel);
    } else {
        out.data.chunks_mut(n).enumerate().for_each(row_kernel);
    }
    Ok(out)
}

/// `aᵀ · b`.
pub fn matmul_tn<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows != b.rows {
        return Err(Error::ShapeMismatch {
            op: "matmul_tn",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let (m, k, n) = (a.cols, a.rows, b.cols);
    flops::record(2 * (m * k * n) as u64);
    let mut out = Matrix::zeros(m, n);
    if n == 0 {
        return Ok(out);
    }
    let row_kernel = |(i, c_row): (usize, &mut [T])| {
        for p in 0..k {
            axpy(c_row, a.data[p * m + i], b.row(p));
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        out.data.par_chunks_mut(n).enumerate().for_each(row_kernel);
    } else {
        out.data.chunks_mut(n).enumerate().for_each(row_kernel);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a[(i, k)] * b[(k, j)];
                }
                c[(i, j)] = s;
            }
        }
        c
    }

    #[test]
    fn identity_left() {
        let mut rng = Rng::new(1);
        let b = rng.normal_matrix(3, 4, 1.0);
        let c = matmul(&Matrix::identity(3), &b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn hand_example() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = Rng::new(7);
        let a = rng.normal_matrix(7, 5, 1.0);
        let b = rng.normal_matrix(5, 3, 1.0);
        let c = matmul(&a, &b).unwrap();
        let r = naive(&a, &b);
        for (x, y) in c.as_slice().iter().zip(r.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn transposed_variants_agree() {
        let mut rng = Rng::new(3);
        let a = rng.normal_matrix(6, 4, 1.0);
        let b = rng.normal_matrix(5, 4, 1.0);
        let nt = matmul_nt(&a, &b).unwrap();
        let r = naive(&a, &b.transpose());
        assert!(nt.max_abs_diff(&r) < 1e-12);
        let c = rng.normal_matrix(6, 3, 1.0);
        let tn = matmul_tn(&a, &c).unwrap();
        assert_eq!(tn, matmul(&a.transpose(), &c).unwrap());
    }

    #[test]
    fn parallel_path_is_bit_identical() {
        let mut rng = Rng::new(11);
        let a = rng.normal_matrix(96, 80, 1.0);
        let b = rng.normal_matrix(80, 64, 1.0);
        let par = matmul(&a, &b).unwrap();
        // single-row products never take the parallel path
        for i in 0..a.rows() {
            let row = a.row_range(i, i + 1);
            let serial = matmul(&row, &b).unwrap();
            assert_eq!(serial.as_slice(), par.row(i));
        }
    }

    #[test]
    fn associativity_with_identity() {
        let mut rng = Rng::new(5);
        let a = rng.normal_matrix(4, 6, 1.0);
        let b = rng.normal_matrix(6, 2, 1.0);
        let i = Matrix::identity(6);
        let left = matmul(&matmul(&a, &i).unwrap(), &b).unwrap();
        let right = matmul(&a, &matmul(&i, &b).unwrap()).unwrap();
        let direct = matmul(&a, &b).unwrap();
        assert_eq!(left, direct);
        assert_eq!(right, direct);
    }

    #[test]
    fn shape_error_names_both_shapes() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        let err = matmul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
        assert!(matches!(
            err,
            Error::ShapeMismatch {
                lhs: (2, 3),
                rhs: (2, 3),
                ..
            }
        ));
    }

    #[test]
    fn checked_constructor_rejects_nan() {
        let err = Matrix::new_checked(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1 }));
        assert!(Matrix::new(2, 2, vec![0.0; 3]).is_err());
    }
}
