use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::similarity::{embedding_cosine_similarity, export_gate_weights, weighted_weight_magnitude};
use crate::backbone::ForecastModel;
use crate::error::{Result, VeError};
use crate::head::{ProjectionHead, VariateEmbedding};
use crate::numeric::{RealMatrix, Scalar};

/// Hex SHA-256 of a model's checkpoint text.
pub fn fingerprint(model: &ForecastModel) -> Result<String> {
    Ok(hex::encode(Sha256::digest(model.to_json()?.as_bytes())))
}

/// Writes a matrix as comma-separated rows without a header.
pub fn write_matrix_csv(path: &Path, m: &RealMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| VeError::Format(format!("{}: {e}", path.display())))?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:e}")))
            .map_err(|e| VeError::Format(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| VeError::io(format!("writing {}", path.display()), e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisOptions {
    pub variates: Range<usize>,
    /// Labels of every variate of the model, if known.
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub variate: Option<usize>,
    pub member: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisManifest {
    pub model_fingerprint: String,
    pub backbone: String,
    pub head_variant: String,
    pub experts: usize,
    pub channels: usize,
    pub first_variate: usize,
    pub variate_labels: Vec<String>,
    pub artifacts: Vec<ArtifactEntry>,
    pub warnings: Vec<String>,
}

fn range_embedding(ve: &VariateEmbedding, range: &Range<usize>) -> VariateEmbedding {
    VariateEmbedding::new(RealMatrix::from_fn(ve.experts(), range.len(), |j, c| ve.logits.get(j, range.start + c)))
}

fn magnitudes<S: Scalar>(
    head: &ProjectionHead<S>,
    range: &Range<usize>,
    dir: &Path,
    artifacts: &mut Vec<ArtifactEntry>,
) -> Result<()> {
    let ve = head.as_ve().expect("checked by caller");
    for member in 0..ve.banks.len() {
        for v in range.clone() {
            let m = weighted_weight_magnitude(ve, member, v)?;
            let file = format!("magnitude_v{v}_m{member}.csv");
            write_matrix_csv(&dir.join(&file), &m)?;
            artifacts.push(ArtifactEntry {
                file,
                kind: "weighted_weight_magnitude".into(),
                rows: m.rows(),
                cols: m.cols(),
                variate: Some(v),
                member: Some(member),
            });
        }
    }
    Ok(())
}

/// Writes similarity, gate and magnitude artifacts for a variate range plus
/// `manifest.json` into `dir`.
pub fn export_analysis(model: &ForecastModel, options: &AnalysisOptions, dir: &Path) -> Result<AnalysisManifest> {
    let ve = model.embedding().ok_or_else(|| {
        VeError::Config("checkpoint has a channel-independent head; it has no variate embedding to analyze".into())
    })?;
    let range = options.variates.clone();
    let gates = export_gate_weights(ve, range.clone())?;
    std::fs::create_dir_all(dir).map_err(|e| VeError::io(format!("creating {}", dir.display()), e))?;

    let sim = embedding_cosine_similarity(&range_embedding(ve, &range));
    let mut artifacts = Vec::new();
    write_matrix_csv(&dir.join("similarity.csv"), &sim.values)?;
    artifacts.push(ArtifactEntry {
        file: "similarity.csv".into(),
        kind: "abs_cosine_similarity".into(),
        rows: sim.values.rows(),
        cols: sim.values.cols(),
        variate: None,
        member: None,
    });
    write_matrix_csv(&dir.join("gates.csv"), &gates.weights)?;
    artifacts.push(ArtifactEntry {
        file: "gates.csv".into(),
        kind: "gate_weights".into(),
        rows: gates.weights.rows(),
        cols: gates.weights.cols(),
        variate: None,
        member: None,
    });
    match model {
        ForecastModel::Linear(m) => magnitudes(&m.head, &range, dir, &mut artifacts)?,
        ForecastModel::DLinear(m) => magnitudes(&m.head, &range, dir, &mut artifacts)?,
        ForecastModel::Fits(m) => magnitudes(&m.head, &range, dir, &mut artifacts)?,
    }

    let labels = match &options.labels {
        Some(l) if l.len() == ve.channels() => range.clone().map(|i| l[i].clone()).collect(),
        _ => range.clone().map(|i| format!("variate_{i}")).collect(),
    };
    let warnings = sim
        .zero_columns
        .iter()
        .map(|&i| format!("variate {} has a zero embedding; its similarities are set to 0", range.start + i))
        .collect();
    let manifest = AnalysisManifest {
        model_fingerprint: fingerprint(model)?,
        backbone: model.kind().as_str().into(),
        head_variant: model.head_variant().as_str().into(),
        experts: ve.experts(),
        channels: ve.channels(),
        first_variate: range.start,
        variate_labels: labels,
        artifacts,
        warnings,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| VeError::Format(e.to_string()))?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| VeError::io(format!("writing {}", path.display()), e))?;
    Ok(manifest)
}
