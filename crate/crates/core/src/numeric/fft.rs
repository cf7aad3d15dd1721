//! One-sided real DFTs: unnormalized forward, `1/N` on the inverse.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, VeError};

/// Number of one-sided bins for a real signal of length `n`.
#[inline]
pub fn onesided_len(n: usize) -> usize {
    n / 2 + 1
}

/// Cached forward/inverse plans for one signal length.
#[derive(Clone)]
pub struct RealDft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl fmt::Debug for RealDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealDft").field("len", &self.len).finish()
    }
}

impl RealDft {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(VeError::shape(format!("DFT length must be >= 2, got {len}")));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            len,
            forward,
            inverse,
            scratch_len,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn bins(&self) -> usize {
        onesided_len(self.len)
    }

    /// Weight of bin `m` in the one-sided inverse sum: 1 for DC and Nyquist, 2 otherwise.
    #[inline]
    pub fn bin_weight(&self, m: usize) -> f64 {
        if m == 0 || (self.len % 2 == 0 && m == self.len / 2) {
            1.0
        } else {
            2.0
        }
    }

    pub fn forward(&self, signal: &[f64]) -> Result<Vec<Complex64>> {
        if signal.len() != self.len {
            return Err(VeError::shape(format!(
                "rfft expects {} samples, got {}",
                self.len,
                signal.len()
            )));
        }
        let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        self.forward.process_with_scratch(&mut buf, &mut scratch);
        buf.truncate(self.bins());
        Ok(buf)
    }

    /// Inverse of [`RealDft::forward`]. Imaginary parts of the DC and Nyquist
    /// bins do not contribute.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        let bins = self.bins();
        if spectrum.len() != bins {
            return Err(VeError::shape(format!(
                "irfft of length {} expects {bins} bins, got {}",
                self.len,
                spectrum.len()
            )));
        }
        let n = self.len;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new(spectrum[0].re, 0.0);
        for m in 1..bins {
            if n % 2 == 0 && m == n / 2 {
                buf[m] = Complex64::new(spectrum[m].re, 0.0);
            } else {
                buf[m] = spectrum[m];
                buf[n - m] = spectrum[m].conj();
            }
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        self.inverse.process_with_scratch(&mut buf, &mut scratch);
        let scale = 1.0 / n as f64;
        Ok(buf.iter().map(|z| z.re * scale).collect())
    }

    /// Gradient of a real loss with respect to the one-sided spectrum fed to
    /// [`RealDft::inverse`], given the gradient `grad` with respect to its output.
    pub fn inverse_adjoint(&self, grad: &[f64]) -> Result<Vec<Complex64>> {
        let mut spec = self.forward(grad)?;
        let n = self.len as f64;
        for (m, z) in spec.iter_mut().enumerate() {
            *z *= self.bin_weight(m) / n;
        }
        Ok(spec)
    }
}

/// One-sided DFT of a real signal.
pub fn rfft(signal: &[f64]) -> Result<Vec<Complex64>> {
    RealDft::new(signal.len())?.forward(signal)
}

/// Inverse one-sided DFT producing `target_len` samples.
pub fn irfft(spectrum: &[Complex64], target_len: usize) -> Result<Vec<f64>> {
    if target_len < 2 || spectrum.len() != onesided_len(target_len) {
        return Err(VeError::shape(format!(
            "spectrum of {} bins does not match target length {target_len}",
            spectrum.len()
        )));
    }
    RealDft::new(target_len)?.inverse(spectrum)
}
