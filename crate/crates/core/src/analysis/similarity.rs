use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VeError};
use crate::head::{gate_weights, VariateEmbedding, VeHead};
use crate::numeric::{RealMatrix, Scalar};

/// Norms at or below this are treated as zero.
const ZERO_NORM: f64 = 1e-300;

/// `C × C` absolute cosine similarities between embedding columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub values: RealMatrix,
    /// Variates whose embedding column has zero norm.
    pub zero_columns: Vec<usize>,
}

pub fn embedding_cosine_similarity(ve: &VariateEmbedding) -> SimilarityMatrix {
    let c = ve.channels();
    let cols: Vec<Vec<f64>> = (0..c).map(|i| ve.column(i)).collect();
    let norms: Vec<f64> = cols.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let zero_columns: Vec<usize> = (0..c).filter(|&i| norms[i] <= ZERO_NORM).collect();
    let mut values = RealMatrix::zeros(c, c);
    for i in 0..c {
        values.set(i, i, 1.0);
        for j in i + 1..c {
            let s = if norms[i] <= ZERO_NORM || norms[j] <= ZERO_NORM {
                0.0
            } else {
                let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                (dot.abs() / (norms[i] * norms[j])).min(1.0)
            };
            values.set(i, j, s);
            values.set(j, i, s);
        }
    }
    SimilarityMatrix { values, zero_columns }
}

/// Gate weights of a range of variates: one row per variate, one column per expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateTable {
    pub first_variate: usize,
    pub weights: RealMatrix,
}

fn check_range(range: &Range<usize>, channels: usize) -> Result<()> {
    if range.start >= range.end || range.end > channels {
        return Err(VeError::Index(format!(
            "variate range {}..{} outside 0..{channels}",
            range.start, range.end
        )));
    }
    Ok(())
}

pub fn export_gate_weights(ve: &VariateEmbedding, variates: Range<usize>) -> Result<GateTable> {
    check_range(&variates, ve.channels())?;
    let gate = gate_weights(ve);
    let k = ve.experts();
    let weights = RealMatrix::from_fn(variates.len(), k, |r, j| gate.get(j, variates.start + r));
    Ok(GateTable {
        first_variate: variates.start,
        weights,
    })
}

/// Entry-wise modulus of the effective weights of one variate and member.
pub fn weighted_weight_magnitude<S: Scalar>(head: &VeHead<S>, member: usize, variate: usize) -> Result<RealMatrix> {
    if variate >= head.config.channels {
        return Err(VeError::Index(format!("variate {variate} of {}", head.config.channels)));
    }
    let w = head.variate_weights(member)?;
    Ok(w[variate].map_modulus())
}
