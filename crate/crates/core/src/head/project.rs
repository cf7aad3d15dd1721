//! Bias-augmented projection kernels and the per-variate mixing of experts.

use crate::error::{Result, VeError};
use crate::numeric::{Matrix, Scalar};

use super::gate::GateMatrix;

/// `out[r] += W [x_r; 1]` for every row `r` of a contiguous block.
///
/// `x` holds `n × D` values, `w` is `H × (D+1)` with the bias in the last
/// column and `out` holds `n × H` values.
pub(crate) fn project_block<S: Scalar>(x: &[S], w: &Matrix<S>, out: &mut [S]) {
    let (h, d1) = w.shape();
    let d = d1 - 1;
    for (xr, yr) in x.chunks_exact(d).zip(out.chunks_exact_mut(h)) {
        for (o, wrow) in yr.iter_mut().zip(w.as_slice().chunks_exact(d1)) {
            let mut acc = wrow[d];
            for (&a, &b) in xr.iter().zip(&wrow[..d]) {
                acc += a * b;
            }
            *o += acc;
        }
    }
}

/// Accumulates `dW += Gᵀ conj([X 1])` and, if requested, `dX += G conj(W)`
/// without its bias column.
pub(crate) fn project_block_backward<S: Scalar>(
    x: &[S],
    w: &Matrix<S>,
    grad_out: &[S],
    grad_w: &mut Matrix<S>,
    grad_x: Option<&mut [S]>,
) {
    let (h, d1) = w.shape();
    let d = d1 - 1;
    let gw = grad_w.as_mut_slice();
    for (xr, gr) in x.chunks_exact(d).zip(grad_out.chunks_exact(h)) {
        for (hh, &g) in gr.iter().enumerate() {
            let row = &mut gw[hh * d1..(hh + 1) * d1];
            for (acc, &xv) in row[..d].iter_mut().zip(xr) {
                *acc += g * xv.conj();
            }
            row[d] += g;
        }
    }
    if let Some(gx) = grad_x {
        for (gxr, gr) in gx.chunks_exact_mut(d).zip(grad_out.chunks_exact(h)) {
            for (&g, wrow) in gr.iter().zip(w.as_slice().chunks_exact(d1)) {
                for (acc, &wv) in gxr.iter_mut().zip(&wrow[..d]) {
                    *acc += g * wv.conj();
                }
            }
        }
    }
}

/// Per-variate weights `W̃_c = Σ_j gate[j, c] P_j`.
pub fn mix_weights<S: Scalar>(experts: &[Matrix<S>], gate: &GateMatrix) -> Result<Vec<Matrix<S>>> {
    let (k, channels) = gate.weights.shape();
    if experts.len() != k {
        return Err(VeError::shape(format!("{} experts for {k} gate rows", experts.len())));
    }
    let shape = experts[0].shape();
    if experts.iter().any(|e| e.shape() != shape) {
        return Err(VeError::shape("experts differ in shape"));
    }
    Ok((0..channels).map(|c| mix_one(experts, gate, c)).collect())
}

pub(crate) fn mix_one<S: Scalar>(experts: &[Matrix<S>], gate: &GateMatrix, c: usize) -> Matrix<S> {
    let (h, d1) = experts[0].shape();
    let mut w = Matrix::zeros(h, d1);
    for (j, p) in experts.iter().enumerate() {
        w.add_scaled(p, gate.get(j, c));
    }
    w
}

/// `Y[:, c] = W̃_c [x_c; 1]` for `X: D × C`, giving `Y: H × C`.
pub fn ve_project<S: Scalar>(w_tilde: &[Matrix<S>], x: &Matrix<S>) -> Result<Matrix<S>> {
    let (d, channels) = x.shape();
    if w_tilde.len() != channels {
        return Err(VeError::shape(format!("{} variate weights for {channels} columns", w_tilde.len())));
    }
    let h = w_tilde.first().map_or(0, Matrix::rows);
    if w_tilde.iter().any(|w| w.shape() != (h, d + 1)) {
        return Err(VeError::shape(format!("variate weights must be {h}x{}", d + 1)));
    }
    let xt = x.transpose();
    let mut out = vec![S::zero(); h];
    let mut y = Matrix::zeros(h, channels);
    for (c, w) in w_tilde.iter().enumerate() {
        out.iter_mut().for_each(|v| *v = S::zero());
        project_block(xt.row(c), w, &mut out);
        for (hh, &v) in out.iter().enumerate() {
            y.set(hh, c, v);
        }
    }
    Ok(y)
}
