use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{Result, VeError};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

pub type RealMatrix = Matrix<f64>;
pub type ComplexMatrix = Matrix<Complex64>;

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(VeError::shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(VeError::shape("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = S::zero());
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b.scale(s);
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Sum over all entries of `Re(conj(self) * other)`.
    pub fn re_inner(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.re_dot(b))
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).modulus())
            .fold(0.0, f64::max)
    }

    pub fn map_modulus(&self) -> RealMatrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.modulus()).collect(),
        }
    }

    fn check(cond: bool, what: &str, a: &Self, b: &Self) -> Result<()> {
        if cond {
            Ok(())
        } else {
            Err(VeError::shape(format!(
                "{what}: {}x{} with {}x{}",
                a.rows, a.cols, b.rows, b.cols
            )))
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        Self::check(self.cols == other.rows, "matmul", self, other)?;
        Ok(gemm_nn::<S, false>(self, other))
    }

    /// `self · otherᵀ`.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        Self::check(self.cols == other.cols, "matmul_nt", self, other)?;
        Ok(gemm_nt::<S, false>(self, other))
    }

    /// `self · otherᴴ`.
    pub fn matmul_adjoint_right(&self, other: &Self) -> Result<Self> {
        Self::check(self.cols == other.cols, "matmul_adjoint_right", self, other)?;
        Ok(gemm_nt::<S, true>(self, other))
    }

    /// `selfᴴ · other`.
    pub fn matmul_adjoint_left(&self, other: &Self) -> Result<Self> {
        Self::check(self.rows == other.rows, "matmul_adjoint_left", self, other)?;
        Ok(gemm_tn::<S, true, false>(self, other))
    }

    /// `selfᵀ · conj(other)`; the weight gradient of `Y = X Wᵀ` is `Gᵀ conj(X)`.
    pub fn matmul_tn_conj_right(&self, other: &Self) -> Result<Self> {
        Self::check(self.rows == other.rows, "matmul_tn_conj_right", self, other)?;
        Ok(gemm_tn::<S, false, true>(self, other))
    }

    /// `self · conj(other)`.
    pub fn matmul_conj_right(&self, other: &Self) -> Result<Self> {
        Self::check(self.cols == other.rows, "matmul_conj_right", self, other)?;
        Ok(gemm_nn::<S, true>(self, other))
    }
}

impl RealMatrix {
    pub fn to_complex(&self) -> ComplexMatrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

#[inline]
fn maybe_conj<S: Scalar, const C: bool>(v: S) -> S {
    if C {
        v.conj()
    } else {
        v
    }
}

fn gemm_nn<S: Scalar, const CB: bool>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    let (n, m, p) = (a.rows, a.cols, b.cols);
    let mut out = Matrix::zeros(n, p);
    for i in 0..n {
        let arow = a.row(i);
        let orow = &mut out.data[i * p..(i + 1) * p];
        for (k, &aik) in arow.iter().enumerate().take(m) {
            let brow = &b.data[k * p..(k + 1) * p];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * maybe_conj::<S, CB>(bkj);
            }
        }
    }
    out
}

fn gemm_nt<S: Scalar, const CB: bool>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    let (n, p) = (a.rows, b.rows);
    let mut out = Matrix::zeros(n, p);
    for i in 0..n {
        let arow = a.row(i);
        for j in 0..p {
            let brow = b.row(j);
            let mut acc = S::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * maybe_conj::<S, CB>(y);
            }
            out.data[i * p + j] = acc;
        }
    }
    out
}

fn gemm_tn<S: Scalar, const CA: bool, const CB: bool>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    let (n, p) = (a.cols, b.cols);
    let mut out = Matrix::zeros(n, p);
    for k in 0..a.rows {
        let arow = a.row(k);
        let brow = b.row(k);
        for (i, &aki) in arow.iter().enumerate() {
            let aki = maybe_conj::<S, CA>(aki);
            let orow = &mut out.data[i * p..(i + 1) * p];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aki * maybe_conj::<S, CB>(bkj);
            }
        }
    }
    out
}

/// Real matrix product.
pub fn matmul(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix> {
    a.matmul(b)
}

/// Complex matrix product.
pub fn complex_matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)
}
