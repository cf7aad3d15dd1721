//! Browser bindings: head budget explorer, gate and similarity view of an
//! editable embedding, and a small training run on the grouped series.
//!
//! Every export returns JSON text so the page needs no generated glue types.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use ve_forecast::analysis::embedding_cosine_similarity;
use ve_forecast::backbone::{BackboneKind, HeadSpec, ModelSpec};
use ve_forecast::data::synthetic::grouped_dataset;
use ve_forecast::data::{chrono_split, standardize_splits, SplitSpec};
use ve_forecast::head::{
    gate_weights, lora_rank, param_count_with, CountConvention, Domain, HeadVariant, VariateEmbedding, VeHeadConfig,
    VE_INIT_STD,
};
use ve_forecast::numeric::RealMatrix;
use ve_forecast::train::{train_from_spec, AdamConfig, TrainConfig};
use ve_forecast::Result;
use wasm_bindgen::prelude::*;

fn to_js<T: Serialize>(value: Result<T>) -> std::result::Result<String, JsError> {
    let v = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

fn rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

#[derive(Debug, Serialize)]
pub struct Budget {
    pub rank: usize,
    pub effective_expansion: f64,
    pub ci: usize,
    pub vemoe: usize,
    pub vemoe_lora: usize,
    /// Same counts with each complex weight tallied once.
    pub ci_entries: usize,
    pub vemoe_entries: usize,
    pub vemoe_lora_entries: usize,
}

pub fn budget(channels: usize, input_dim: usize, horizon: usize, k: usize, p: f64, complex: bool) -> Result<Budget> {
    let domain = if complex { Domain::Complex } else { Domain::Real };
    let lora = VeHeadConfig::for_variant(HeadVariant::VemoeLora, channels, input_dim, horizon, k, p, domain)?;
    let full = VeHeadConfig::for_variant(HeadVariant::Vemoe, channels, input_dim, horizon, k, p, domain)?;
    let count = |cfg: &VeHeadConfig, v, conv| param_count_with(cfg, v, conv);
    let (s, e) = (CountConvention::RealScalars, CountConvention::Entries);
    Ok(Budget {
        rank: lora_rank(input_dim, horizon, k, p),
        effective_expansion: lora.effective_expansion().unwrap_or(p),
        ci: count(&full, HeadVariant::Ci, s),
        vemoe: count(&full, HeadVariant::Vemoe, s),
        vemoe_lora: count(&lora, HeadVariant::VemoeLora, s),
        ci_entries: count(&full, HeadVariant::Ci, e),
        vemoe_entries: count(&full, HeadVariant::Vemoe, e),
        vemoe_lora_entries: count(&lora, HeadVariant::VemoeLora, e),
    })
}

/// Expert rank and parameter counts of the three head variants.
#[wasm_bindgen(js_name = headBudget)]
pub fn head_budget(
    channels: usize,
    input_dim: usize,
    horizon: usize,
    k: usize,
    p: f64,
    complex: bool,
) -> std::result::Result<String, JsError> {
    to_js(budget(channels, input_dim, horizon, k, p, complex))
}

#[derive(Debug, Serialize)]
pub struct GateView {
    /// `k × C` softmax weights.
    pub gates: Vec<Vec<f64>>,
    /// `C × C` absolute cosine similarity.
    pub similarity: Vec<Vec<f64>>,
    pub zero_columns: Vec<usize>,
}

pub fn gate_view(logits: &[f64], k: usize, channels: usize) -> Result<GateView> {
    let ve = VariateEmbedding::new(RealMatrix::from_vec(k, channels, logits.to_vec())?);
    let sim = embedding_cosine_similarity(&ve);
    Ok(GateView {
        gates: rows(&gate_weights(&ve).weights),
        similarity: rows(&sim.values),
        zero_columns: sim.zero_columns,
    })
}

/// Gates and similarity of a row-major `k × C` embedding.
#[wasm_bindgen(js_name = gateView)]
pub fn gate_view_js(logits: &[f64], k: usize, channels: usize) -> std::result::Result<String, JsError> {
    to_js(gate_view(logits, k, channels))
}

/// A random `k × C` embedding with standard deviation `scale`, row-major.
#[wasm_bindgen(js_name = randomEmbedding)]
pub fn random_embedding(k: usize, channels: usize, scale: f64, seed: u64) -> Vec<f64> {
    let normal = Normal::new(0.0, scale.max(VE_INIT_STD)).unwrap_or_else(|_| Normal::new(0.0, 1.0).expect("unit"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k * channels).map(|_| normal.sample(&mut rng)).collect()
}

#[derive(Debug, Serialize)]
pub struct GroupedRun {
    pub labels: Vec<String>,
    pub ci_test_mse: f64,
    pub ve_test_mse: f64,
    pub ci_loss: Vec<f64>,
    pub ve_loss: Vec<f64>,
    pub similarity: Vec<Vec<f64>>,
    pub gates: Vec<Vec<f64>>,
    pub within_group: f64,
    pub cross_group: f64,
}

/// Trains a channel-independent Linear model and one with a factorized
/// variate-embedded head on the grouped series, and reports the learned
/// embedding.
pub fn grouped_run(rows_count: usize, lookback: usize, horizon: usize, epochs: usize, seed: u64) -> Result<GroupedRun> {
    let (ds, patterns) = grouped_dataset(rows_count, seed);
    let (splits, _) = standardize_splits(&chrono_split(&ds, &SplitSpec::standard())?)?;
    let train = TrainConfig {
        epochs,
        batch_size: 32,
        seed,
        adam: AdamConfig::default(),
    };
    let spec = |head| ModelSpec::new(BackboneKind::Linear, lookback, horizon, head);
    let (_, ci) = train_from_spec(&spec(HeadSpec::ci()), &splits, &train)?;
    let (model, ve) = train_from_spec(&spec(HeadSpec::lora(4, 1.0)), &splits, &train)?;
    let emb = model.embedding().expect("variate-embedded head");
    let sim = embedding_cosine_similarity(emb).values;
    let (mut within, mut nw, mut cross, mut nc) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..patterns.len() {
        for j in 0..patterns.len() {
            if i == j {
                continue;
            }
            if patterns[i] == patterns[j] {
                within += sim.get(i, j);
                nw += 1;
            } else {
                cross += sim.get(i, j);
                nc += 1;
            }
        }
    }
    Ok(GroupedRun {
        labels: ds.channel_names.clone(),
        ci_test_mse: ci.test_mse,
        ve_test_mse: ve.test_mse,
        ci_loss: ci.train_loss,
        ve_loss: ve.train_loss,
        similarity: rows(&sim),
        gates: rows(&gate_weights(emb).weights),
        within_group: within / nw.max(1) as f64,
        cross_group: cross / nc.max(1) as f64,
    })
}

#[wasm_bindgen(js_name = trainGrouped)]
pub fn train_grouped(
    rows_count: usize,
    lookback: usize,
    horizon: usize,
    epochs: usize,
    seed: u64,
) -> std::result::Result<String, JsError> {
    to_js(grouped_run(rows_count, lookback, horizon, epochs, seed))
}
