use num_complex::Complex64;

use crate::error::{Result, VeError};
use crate::numeric::{onesided_len, RealDft};

/// Default cutoff: six harmonics of the daily period of hourly data plus ten
/// bins, bounded by the number of one-sided bins of the look-back.
pub fn default_cutoff(lookback: usize) -> usize {
    ((lookback / 24 + 1) * 6 + 10).min(onesided_len(lookback))
}

/// Number of output bins the head produces for a retained band of `cutoff` bins.
pub fn output_bins(lookback: usize, horizon: usize, cutoff: usize) -> usize {
    (cutoff * (lookback + horizon) / lookback).min(onesided_len(lookback + horizon))
}

pub fn validate_cutoff(lookback: usize, cutoff: usize) -> Result<()> {
    if lookback < 2 {
        return Err(VeError::Config(format!("spectral look-back must be >= 2, got {lookback}")));
    }
    if cutoff == 0 || cutoff > onesided_len(lookback) {
        return Err(VeError::Config(format!(
            "cutoff {cutoff} outside 1..={} for look-back {lookback}",
            onesided_len(lookback)
        )));
    }
    Ok(())
}

/// Transforms shared by every window of one spectral model.
#[derive(Debug, Clone)]
pub(crate) struct SpectralPlan {
    pub lookback: usize,
    pub horizon: usize,
    pub cutoff: usize,
    pub out_bins: usize,
    input: RealDft,
    output: RealDft,
}

impl SpectralPlan {
    pub fn new(lookback: usize, horizon: usize, cutoff: usize) -> Result<Self> {
        validate_cutoff(lookback, cutoff)?;
        Ok(Self {
            lookback,
            horizon,
            cutoff,
            out_bins: output_bins(lookback, horizon, cutoff),
            input: RealDft::new(lookback)?,
            output: RealDft::new(lookback + horizon)?,
        })
    }

    fn scale(&self) -> f64 {
        (self.lookback + self.horizon) as f64 / self.lookback as f64
    }

    /// Low-passed spectrum of one look-back window.
    pub fn analyze(&self, x: &[f64], out: &mut [Complex64]) -> Result<()> {
        let spec = self.input.forward(x)?;
        out.copy_from_slice(&spec[..self.cutoff]);
        Ok(())
    }

    /// Full `L + H` series from the mapped band, amplitude-rescaled.
    pub fn synthesize(&self, band: &[Complex64]) -> Result<Vec<f64>> {
        if band.len() != self.out_bins {
            return Err(VeError::shape(format!("{} mapped bins, expected {}", band.len(), self.out_bins)));
        }
        let mut spec = vec![Complex64::new(0.0, 0.0); self.output.bins()];
        spec[..self.out_bins].copy_from_slice(band);
        let scale = self.scale();
        let mut series = self.output.inverse(&spec)?;
        for v in &mut series {
            *v *= scale;
        }
        Ok(series)
    }

    /// Gradient with respect to the mapped band given the gradient with
    /// respect to the last `H` samples of [`SpectralPlan::synthesize`].
    pub fn synthesize_adjoint(&self, grad_tail: &[f64], out: &mut [Complex64]) -> Result<()> {
        let n = self.lookback + self.horizon;
        let mut g = vec![0.0; n];
        let scale = self.scale();
        for (dst, &v) in g[self.lookback..].iter_mut().zip(grad_tail) {
            *dst = v * scale;
        }
        let spec = self.output.inverse_adjoint(&g)?;
        out.copy_from_slice(&spec[..self.out_bins]);
        Ok(())
    }
}

/// Runs one look-back window through the spectral pipeline with an arbitrary
/// band mapping and returns the whole `L + H` series.
pub fn extend_series(
    x: &[f64],
    horizon: usize,
    cutoff: usize,
    map: impl FnOnce(&[Complex64]) -> Vec<Complex64>,
) -> Result<Vec<f64>> {
    let plan = SpectralPlan::new(x.len(), horizon, cutoff)?;
    let mut band = vec![Complex64::new(0.0, 0.0); cutoff];
    plan.analyze(x, &mut band)?;
    plan.synthesize(&map(&band))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn default_cutoff_values() {
        assert_eq!(default_cutoff(720), 196);
        assert_eq!(default_cutoff(96), 40);
        assert_eq!(default_cutoff(24), 13);
        assert_eq!(output_bins(720, 192, 196), 248);
    }

    #[test]
    fn cutoff_bounds() {
        assert!(validate_cutoff(10, 6).is_ok());
        assert!(matches!(validate_cutoff(10, 7), Err(VeError::Config(_))));
        assert!(validate_cutoff(10, 0).is_err());
    }

    #[test]
    fn identity_mapping_at_zero_horizon_reproduces_input() {
        let x: Vec<f64> = (0..64).map(|t| (t as f64 * 0.3).sin() + 0.01 * (t * t) as f64).collect();
        let y = extend_series(&x, 0, 33, |b| b.to_vec()).unwrap();
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn mapped_cosine_continues() {
        let (l, h) = (48, 24);
        let x: Vec<f64> = (0..l).map(|t| (2.0 * PI * t as f64 / 24.0 + 0.4).cos()).collect();
        // bin 2 of the 48-sample window is bin 3 of the 72-sample window
        let y = extend_series(&x, h, 3, |b| {
            let mut out = vec![Complex64::new(0.0, 0.0); 4];
            out[3] = b[2];
            out
        })
        .unwrap();
        for (t, v) in y.iter().enumerate() {
            assert!((v - (2.0 * PI * t as f64 / 24.0 + 0.4).cos()).abs() <= 1e-9);
        }
    }
}
