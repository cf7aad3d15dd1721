//! Read-only views of trained embeddings and heads, with file exports.

mod export;
mod similarity;

pub use export::{
    export_analysis, fingerprint, write_matrix_csv, AnalysisManifest, AnalysisOptions, ArtifactEntry,
};
pub use similarity::{
    embedding_cosine_similarity, export_gate_weights, weighted_weight_magnitude, GateTable, SimilarityMatrix,
};
