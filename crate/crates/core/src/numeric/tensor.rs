use serde::{Deserialize, Serialize};

use super::matrix::RealMatrix;
use crate::error::{Result, VeError};

/// Batch of multivariate windows laid out as `batch × time × channel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    batch: usize,
    time: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(batch: usize, time: usize, channels: usize) -> Self {
        Self {
            batch,
            time,
            channels,
            data: vec![0.0; batch * time * channels],
        }
    }

    pub fn from_vec(batch: usize, time: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * time * channels {
            return Err(VeError::shape(format!(
                "{} values cannot fill {batch}x{time}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            batch,
            time,
            channels,
            data,
        })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.batch, self.time, self.channels)
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.batch
    }

    #[inline]
    pub fn time(&self) -> usize {
        self.time
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    fn offset(&self, b: usize, t: usize, c: usize) -> usize {
        (b * self.time + t) * self.channels + c
    }

    #[inline]
    pub fn get(&self, b: usize, t: usize, c: usize) -> f64 {
        self.data[self.offset(b, t, c)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, t: usize, c: usize, v: f64) {
        let o = self.offset(b, t, c);
        self.data[o] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Window `b` as a `time × channels` row-major slice.
    pub fn window(&self, b: usize) -> &[f64] {
        let stride = self.time * self.channels;
        &self.data[b * stride..(b + 1) * stride]
    }

    /// One row per (channel, window) pair, row index `c * batch + b`, holding
    /// that channel's series over time.
    pub fn to_variate_rows(&self) -> RealMatrix {
        let (nb, nt, nc) = self.dims();
        let mut data = vec![0.0; nb * nt * nc];
        for b in 0..nb {
            for t in 0..nt {
                for c in 0..nc {
                    data[(c * nb + b) * nt + t] = self.get(b, t, c);
                }
            }
        }
        RealMatrix::from_vec(nc * nb, nt, data).expect("sized above")
    }

    /// Inverse of [`Tensor3::to_variate_rows`].
    pub fn from_variate_rows(rows: &RealMatrix, batch: usize, channels: usize) -> Result<Self> {
        if rows.rows() != batch * channels {
            return Err(VeError::shape(format!(
                "{} rows do not split into {batch} windows x {channels} channels",
                rows.rows()
            )));
        }
        let nt = rows.cols();
        let mut out = Self::zeros(batch, nt, channels);
        for c in 0..channels {
            for b in 0..batch {
                let row = rows.row(c * batch + b);
                for (t, &v) in row.iter().enumerate() {
                    out.set(b, t, c, v);
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
