use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Element type of a weight matrix: `f64` for ordinary linear heads and
/// `Complex64` for frequency-domain heads.
///
/// Gradients of complex parameters follow the real-pair convention: the
/// gradient of a real loss with respect to `z = x + iy` is stored as
/// `dL/dx + i dL/dy`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Default
    + Serialize
    + DeserializeOwned
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    /// Number of real scalars stored per entry.
    const REAL_PARTS: usize;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn scale(self, s: f64) -> Self;
    fn conj(self) -> Self;
    /// `Re(conj(self) * other)`.
    fn re_dot(self, other: Self) -> f64;
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
    fn push_parts(self, out: &mut Vec<f64>);
    fn from_parts(parts: &[f64]) -> Self;
}

impl Scalar for f64 {
    const REAL_PARTS: usize = 1;

    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re_dot(self, other: Self) -> f64 {
        self * other
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn push_parts(self, out: &mut Vec<f64>) {
        out.push(self);
    }
    #[inline]
    fn from_parts(parts: &[f64]) -> Self {
        parts[0]
    }
}

impl Scalar for Complex64 {
    const REAL_PARTS: usize = 2;

    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        Complex64::new(self.re * s, self.im * s)
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::new(self.re, -self.im)
    }
    #[inline]
    fn re_dot(self, other: Self) -> f64 {
        self.re * other.re + self.im * other.im
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn push_parts(self, out: &mut Vec<f64>) {
        out.push(self.re);
        out.push(self.im);
    }
    #[inline]
    fn from_parts(parts: &[f64]) -> Self {
        Complex64::new(parts[0], parts[1])
    }
}
