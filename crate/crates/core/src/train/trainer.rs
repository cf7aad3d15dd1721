use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::mse_loss;
use crate::backbone::{ForecastModel, ModelSpec};
use crate::data::{SplitPart, Splits, TimeSeriesDataset, WindowIndex};
use crate::error::{Result, VeError};
use crate::numeric::Parameters;

/// Offset mixed into the seed of the batch-order generator.
const SHUFFLE_STREAM: u64 = 0x5eed_0f_ba7c4e5;

/// Windows scored per forward pass during evaluation.
const EVAL_CHUNK: usize = 256;

/// Wall-clock timer that reads zero where the platform has no clock.
struct Stopwatch(Option<std::time::Instant>);

impl Stopwatch {
    fn start() -> Self {
        Self((!cfg!(target_arch = "wasm32")).then(std::time::Instant::now))
    }

    fn seconds(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            seed: 2021,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(VeError::Config("epochs and batch size must be positive".into()));
        }
        let lr = self.adam.learning_rate;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(VeError::Config(format!("learning rate must be positive, got {lr}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub test_mse: f64,
    pub val_mse: f64,
    pub param_count: usize,
    pub seed: u64,
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Validation MSE after each epoch.
    pub val_history: Vec<f64>,
    /// Excluded from serialized records so that they stay deterministic.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

/// Mean squared error over all stride-1 windows of `ds`, scored on the
/// denormalized forecasts.
pub fn evaluate(model: &ForecastModel, ds: &TimeSeriesDataset) -> Result<f64> {
    let index = WindowIndex::new(ds.len(), model.lookback(), model.horizon(), 1)?;
    let all: Vec<usize> = (0..index.len()).collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for chunk in all.chunks(EVAL_CHUNK) {
        let batch = index.gather(ds, chunk);
        let pred = model.forward(&batch.inputs)?;
        for (p, t) in pred.as_slice().iter().zip(batch.targets.as_slice()) {
            sum += (p - t) * (p - t);
        }
        count += pred.as_slice().len();
    }
    Ok(sum / count as f64)
}

/// Trains `model` in place on the training segment, scoring the validation
/// segment after every epoch and the test segment at the end. Validation and
/// test windows draw their look-back from the preceding segments.
pub fn train_model(model: &mut ForecastModel, splits: &Splits, config: &TrainConfig) -> Result<RunMetrics> {
    config.validate()?;
    let started = Stopwatch::start();
    let (l, h) = (model.lookback(), model.horizon());
    let val = splits.with_context(SplitPart::Val, l)?;
    let test = splits.with_context(SplitPart::Test, l)?;
    let index = WindowIndex::new(splits.train.len(), l, h, 1)?;
    let mut order: Vec<usize> = (0..index.len()).collect();
    let mut shuffle = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut params = model.flat_params();
    let mut state = AdamState::new(params.len());
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut val_history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = index.gather(&splits.train, chunk);
            let (pred, cache) = model.forward_train(&batch.inputs)?;
            let (loss, grad) = mse_loss(&pred, &batch.targets)?;
            if !loss.is_finite() {
                return Err(VeError::Numeric(format!(
                    "non-finite training loss {loss} at epoch {}, batch {}",
                    epoch + 1,
                    b + 1
                )));
            }
            let grads = model.backward(&cache, &grad)?.flat_params();
            adam_step(&mut params, &grads, &mut state, &config.adam)?;
            model.load_flat(&params)?;
            epoch_loss += loss;
            batches += 1;
        }
        train_loss.push(epoch_loss / batches as f64);
        val_history.push(evaluate(model, &val)?);
    }

    let test_mse = evaluate(model, &test)?;
    if !test_mse.is_finite() {
        return Err(VeError::Numeric(format!("non-finite test MSE {test_mse}")));
    }
    Ok(RunMetrics {
        test_mse,
        val_mse: *val_history.last().expect("at least one epoch"),
        param_count: model.param_count(),
        seed: config.seed,
        train_loss,
        val_history,
        wall_clock_seconds: started.seconds(),
    })
}

/// Builds a model from `spec` with the init generator seeded by `config.seed`
/// and trains it.
pub fn train_from_spec(spec: &ModelSpec, splits: &Splits, config: &TrainConfig) -> Result<(ForecastModel, RunMetrics)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ForecastModel::new(spec, splits.train.channels(), &mut rng)?;
    let metrics = train_model(&mut model, splits, config)?;
    Ok((model, metrics))
}

/// Per-seed metrics with the mean and population standard deviation of the test MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub runs: Vec<RunMetrics>,
    pub test_mse_mean: f64,
    pub test_mse_std: f64,
    pub val_mse_mean: f64,
}

pub fn summarize_seeds(runs: Vec<RunMetrics>) -> Result<SeedSummary> {
    if runs.is_empty() {
        return Err(VeError::Config("at least one seed is required".into()));
    }
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.test_mse).sum::<f64>() / n;
    let var = runs.iter().map(|r| (r.test_mse - mean).powi(2)).sum::<f64>() / n;
    let val = runs.iter().map(|r| r.val_mse).sum::<f64>() / n;
    Ok(SeedSummary {
        runs,
        test_mse_mean: mean,
        test_mse_std: var.sqrt(),
        val_mse_mean: val,
    })
}

/// Runs `run` once per seed and aggregates the results.
pub fn multi_seed_run(seeds: &[u64], mut run: impl FnMut(u64) -> Result<RunMetrics>) -> Result<SeedSummary> {
    if seeds.is_empty() {
        return Err(VeError::Config("at least one seed is required".into()));
    }
    let runs = seeds.iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()?;
    summarize_seeds(runs)
}

/// The default seeds.
pub const DEFAULT_SEEDS: [u64; 3] = [2021, 2022, 2023];
