//! Dense matrices, one-sided DFTs and finite-difference gradient checks.

mod fft;
mod gradcheck;
mod matrix;
mod params;
mod scalar;
mod tensor;

pub use fft::{irfft, onesided_len, rfft, RealDft};
pub use gradcheck::{finite_difference_check, GradCheckReport, GRADIENT_TOLERANCE};
pub use matrix::{complex_matmul, matmul, ComplexMatrix, Matrix, RealMatrix};
pub use params::Parameters;
pub use num_complex::Complex64;
pub use scalar::Scalar;
pub use tensor::Tensor3;
