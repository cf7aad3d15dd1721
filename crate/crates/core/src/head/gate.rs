use serde::{Deserialize, Serialize};

use crate::numeric::RealMatrix;

/// Learnable `k × C` look-up table, one column per variate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariateEmbedding {
    pub logits: RealMatrix,
}

impl VariateEmbedding {
    pub fn new(logits: RealMatrix) -> Self {
        Self { logits }
    }

    pub fn zeros(experts: usize, channels: usize) -> Self {
        Self {
            logits: RealMatrix::zeros(experts, channels),
        }
    }

    #[inline]
    pub fn experts(&self) -> usize {
        self.logits.rows()
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.logits.cols()
    }

    /// Embedding vector of variate `c`.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.experts()).map(|j| self.logits.get(j, c)).collect()
    }
}

/// Column-stochastic `k × C` expert weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateMatrix {
    pub weights: RealMatrix,
}

impl GateMatrix {
    #[inline]
    pub fn get(&self, expert: usize, variate: usize) -> f64 {
        self.weights.get(expert, variate)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.weights.rows()).map(|j| self.weights.get(j, c)).collect()
    }
}

/// Column-wise softmax of the embedding, stabilized by subtracting each column's maximum.
pub fn gate_weights(ve: &VariateEmbedding) -> GateMatrix {
    let (k, c) = ve.logits.shape();
    let mut w = RealMatrix::zeros(k, c);
    for col in 0..c {
        let max = (0..k).map(|j| ve.logits.get(j, col)).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..k {
            let e = (ve.logits.get(j, col) - max).exp();
            w.set(j, col, e);
            sum += e;
        }
        for j in 0..k {
            w.set(j, col, w.get(j, col) / sum);
        }
    }
    GateMatrix { weights: w }
}

/// Pulls a gradient with respect to the gates back to the logits.
pub(crate) fn softmax_backward(gate: &GateMatrix, grad_gate: &RealMatrix) -> RealMatrix {
    let (k, c) = gate.weights.shape();
    let mut out = RealMatrix::zeros(k, c);
    for col in 0..c {
        let dot: f64 = (0..k).map(|j| gate.get(j, col) * grad_gate.get(j, col)).sum();
        for j in 0..k {
            out.set(j, col, gate.get(j, col) * (grad_gate.get(j, col) - dot));
        }
    }
    out
}
