use serde::{Deserialize, Serialize};

use super::split::STD_EPSILON;
use crate::error::{Result, VeError};
use crate::numeric::{RealMatrix, Tensor3};

/// Per-window, per-channel statistics removed from an input batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevInState {
    pub means: RealMatrix,
    pub stds: RealMatrix,
    pub epsilon: f64,
}

/// Removes each window's channel mean and scales by `sqrt(var + eps)`.
/// No learnable affine transform is applied.
pub fn revin_normalize(inputs: &Tensor3) -> Result<(Tensor3, RevInState)> {
    let (nb, nt, nc) = inputs.dims();
    if nt < 2 {
        return Err(VeError::shape(format!("instance normalization needs >= 2 steps, got {nt}")));
    }
    let mut means = RealMatrix::zeros(nb, nc);
    let mut stds = RealMatrix::zeros(nb, nc);
    let mut out = inputs.clone();
    for b in 0..nb {
        for c in 0..nc {
            let mut m = 0.0;
            for t in 0..nt {
                m += inputs.get(b, t, c);
            }
            m /= nt as f64;
            let mut v = 0.0;
            for t in 0..nt {
                let d = inputs.get(b, t, c) - m;
                v += d * d;
            }
            let s = (v / nt as f64 + STD_EPSILON).sqrt();
            for t in 0..nt {
                out.set(b, t, c, (inputs.get(b, t, c) - m) / s);
            }
            means.set(b, c, m);
            stds.set(b, c, s);
        }
    }
    Ok((
        out,
        RevInState {
            means,
            stds,
            epsilon: STD_EPSILON,
        },
    ))
}

/// Re-applies the stored statistics to a `batch × horizon × channel` prediction.
pub fn revin_denormalize(predictions: &Tensor3, state: &RevInState) -> Result<Tensor3> {
    let (nb, nh, nc) = predictions.dims();
    if state.means.shape() != (nb, nc) || state.stds.shape() != (nb, nc) {
        return Err(VeError::shape(format!(
            "state for {:?} applied to {nb} windows x {nc} channels",
            state.means.shape()
        )));
    }
    let mut out = predictions.clone();
    for b in 0..nb {
        for t in 0..nh {
            for c in 0..nc {
                out.set(b, t, c, predictions.get(b, t, c) * state.stds.get(b, c) + state.means.get(b, c));
            }
        }
    }
    Ok(out)
}
