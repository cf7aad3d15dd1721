//! Experiment configuration: TOML file, command-line overrides and defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use ve_forecast::backbone::{BackboneKind, HeadSpec, ModelSpec, DEFAULT_KERNEL};
use ve_forecast::head::HeadVariant;
use ve_forecast::train::{AdamConfig, GridSpec, TrainConfig, DEFAULT_K_SET, DEFAULT_P_SET, DEFAULT_SEEDS};
use ve_forecast::{Result, VeError};

/// Environment variable naming the directory searched for relative dataset paths.
pub const DATA_DIR_ENV: &str = "VE_FORECAST_DATA_DIR";

/// Where the series of an experiment come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// A CSV file split chronologically by the ratio convention of its name.
    #[default]
    Csv,
    /// A directory written by `prepare-mixed` holding pre-cut segments.
    Mixed,
    /// The generated twelve-variate grouped series.
    Grouped,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub path: Option<PathBuf>,
    pub kind: Option<DatasetKind>,
    pub rows: Option<usize>,
    pub channel_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub backbone: Option<BackboneKind>,
    pub kernel: Option<usize>,
    pub cutoff: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadFile {
    pub variant: Option<HeadVariant>,
    pub k: Option<usize>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowFile {
    pub lookback: Option<usize>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub k_set: Option<Vec<usize>>,
    pub p_set: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    pub variants: Option<Vec<HeadVariant>>,
    pub baseline: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    pub dir: Option<PathBuf>,
}

/// A configuration file as written by the user; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub dataset: DatasetFile,
    #[serde(default)]
    pub model: ModelFile,
    #[serde(default)]
    pub head: HeadFile,
    #[serde(default)]
    pub train: TrainFile,
    #[serde(default)]
    pub window: WindowFile,
    #[serde(default)]
    pub grid: GridFile,
    #[serde(default)]
    pub output: OutputFile,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| VeError::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VeError::Io {
            context: format!("read config {}", path.display()),
            source: e,
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Dataset file or directory (dataset.path).
    #[arg(long = "data")]
    pub data: Option<PathBuf>,
    /// Dataset kind (dataset.kind).
    #[arg(long, value_enum)]
    pub kind: Option<DatasetKind>,
    /// Rows of a generated dataset (dataset.rows).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Keep an evenly spaced fraction of the channels (dataset.channel_fraction).
    #[arg(long)]
    pub channel_fraction: Option<f64>,
    /// linear, dlinear or fits (model.backbone).
    #[arg(long)]
    pub backbone: Option<BackboneKind>,
    /// Moving-average kernel of dlinear (model.kernel).
    #[arg(long)]
    pub kernel: Option<usize>,
    /// Retained spectral bins of fits (model.cutoff).
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// ci, vemoe or vemoe_lora (head.variant).
    #[arg(long = "head")]
    pub head: Option<HeadVariant>,
    /// Number of experts (head.k).
    #[arg(long)]
    pub k: Option<usize>,
    /// Parameter expansion ratio of factorized experts (head.p).
    #[arg(long)]
    pub p: Option<f64>,
    /// train.seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// train.epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// train.lr
    #[arg(long)]
    pub lr: Option<f64>,
    /// train.batch
    #[arg(long)]
    pub batch: Option<usize>,
    /// window.lookback
    #[arg(long)]
    pub lookback: Option<usize>,
    /// window.horizon
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated expert counts (grid.k_set).
    #[arg(long, value_delimiter = ',')]
    pub k_set: Option<Vec<usize>>,
    /// Comma-separated expansion ratios (grid.p_set).
    #[arg(long, value_delimiter = ',')]
    pub p_set: Option<Vec<f64>>,
    /// Comma-separated seeds (grid.seeds).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Comma-separated head variants searched (grid.variants).
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<HeadVariant>>,
    /// Also train the channel-independent head in a grid (grid.baseline).
    #[arg(long)]
    pub baseline: Option<bool>,
    /// Output directory (output.dir).
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
}

fn set<T>(slot: &mut Option<T>, value: &Option<T>)
where
    T: Clone,
{
    if value.is_some() {
        slot.clone_from(value);
    }
}

impl Overrides {
    pub fn apply(&self, f: &mut ConfigFile) {
        set(&mut f.dataset.path, &self.data);
        set(&mut f.dataset.kind, &self.kind);
        set(&mut f.dataset.rows, &self.rows);
        set(&mut f.dataset.channel_fraction, &self.channel_fraction);
        set(&mut f.model.backbone, &self.backbone);
        set(&mut f.model.kernel, &self.kernel);
        set(&mut f.model.cutoff, &self.cutoff);
        set(&mut f.head.variant, &self.head);
        set(&mut f.head.k, &self.k);
        set(&mut f.head.p, &self.p);
        set(&mut f.train.seed, &self.seed);
        set(&mut f.train.epochs, &self.epochs);
        set(&mut f.train.lr, &self.lr);
        set(&mut f.train.batch, &self.batch);
        set(&mut f.window.lookback, &self.lookback);
        set(&mut f.window.horizon, &self.horizon);
        set(&mut f.grid.k_set, &self.k_set);
        set(&mut f.grid.p_set, &self.p_set);
        set(&mut f.grid.seeds, &self.seeds);
        set(&mut f.grid.variants, &self.variants);
        set(&mut f.grid.baseline, &self.baseline);
        set(&mut f.output.dir, &self.out);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub kind: DatasetKind,
    pub rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub backbone: BackboneKind,
    pub kernel: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    pub variant: HeadVariant,
    pub k: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub lookback: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub k_set: Vec<usize>,
    pub p_set: Vec<f64>,
    pub seeds: Vec<u64>,
    pub variants: Vec<HeadVariant>,
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// A fully resolved experiment. Its TOML form is a valid configuration file
/// that reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub head: HeadConfig,
    pub train: TrainSection,
    pub window: WindowConfig,
    pub grid: GridConfig,
    pub output: OutputConfig,
}

/// Default rows of generated datasets.
pub const DEFAULT_ROWS: usize = 4000;
/// Default look-back window.
pub const DEFAULT_LOOKBACK: usize = 360;
/// Default forecast horizon.
pub const DEFAULT_HORIZON: usize = 96;
/// Default expert count.
pub const DEFAULT_K: usize = 4;

fn field_error(field: &str, message: impl std::fmt::Display) -> VeError {
    VeError::Config(format!("{field}: {message}"))
}

impl ExperimentConfig {
    /// Fills every missing key of `file` with its default and validates the result.
    pub fn resolve(file: &ConfigFile) -> Result<Self> {
        let adam = AdamConfig::default();
        let train = TrainConfig::default();
        let cfg = Self {
            dataset: DatasetConfig {
                path: file.dataset.path.clone(),
                kind: file.dataset.kind.unwrap_or_default(),
                rows: file.dataset.rows.unwrap_or(DEFAULT_ROWS),
                channel_fraction: file.dataset.channel_fraction,
            },
            model: ModelConfig {
                backbone: file.model.backbone.unwrap_or(BackboneKind::Linear),
                kernel: file.model.kernel.unwrap_or(DEFAULT_KERNEL),
                cutoff: file.model.cutoff,
            },
            head: HeadConfig {
                variant: file.head.variant.unwrap_or(HeadVariant::Ci),
                k: file.head.k.unwrap_or(DEFAULT_K),
                p: file.head.p.unwrap_or(1.0),
            },
            train: TrainSection {
                seed: file.train.seed.unwrap_or(train.seed),
                epochs: file.train.epochs.unwrap_or(train.epochs),
                lr: file.train.lr.unwrap_or(adam.learning_rate),
                batch: file.train.batch.unwrap_or(train.batch_size),
            },
            window: WindowConfig {
                lookback: file.window.lookback.unwrap_or(DEFAULT_LOOKBACK),
                horizon: file.window.horizon.unwrap_or(DEFAULT_HORIZON),
            },
            grid: GridConfig {
                k_set: file.grid.k_set.clone().unwrap_or_else(|| DEFAULT_K_SET.to_vec()),
                p_set: file.grid.p_set.clone().unwrap_or_else(|| DEFAULT_P_SET.to_vec()),
                seeds: file.grid.seeds.clone().unwrap_or_else(|| DEFAULT_SEEDS.to_vec()),
                variants: file.grid.variants.clone().unwrap_or_else(|| vec![HeadVariant::VemoeLora]),
                baseline: file.grid.baseline.unwrap_or(true),
            },
            output: OutputConfig {
                dir: file.output.dir.clone().unwrap_or_else(|| PathBuf::from("runs/latest")),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if any), applies `overrides` and resolves.
    pub fn from_sources(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut file = match path {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        overrides.apply(&mut file);
        Self::resolve(&file)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.kind != DatasetKind::Grouped && self.dataset.path.is_none() {
            return Err(field_error("dataset.path", "required unless dataset.kind = \"grouped\""));
        }
        if self.dataset.rows == 0 {
            return Err(field_error("dataset.rows", "must be positive"));
        }
        if let Some(f) = self.dataset.channel_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(field_error("dataset.channel_fraction", format!("must be in (0, 1], got {f}")));
            }
        }
        if self.head.k == 0 {
            return Err(field_error("head.k", "must be positive"));
        }
        if !(self.head.p > 0.0 && self.head.p.is_finite()) {
            return Err(field_error("head.p", format!("must be positive, got {}", self.head.p)));
        }
        if self.train.epochs == 0 {
            return Err(field_error("train.epochs", "must be positive"));
        }
        if self.train.batch == 0 {
            return Err(field_error("train.batch", "must be positive"));
        }
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            return Err(field_error("train.lr", format!("must be positive, got {}", self.train.lr)));
        }
        if self.window.lookback < 2 {
            return Err(field_error("window.lookback", "must be at least 2"));
        }
        if self.window.horizon == 0 {
            return Err(field_error("window.horizon", "must be positive"));
        }
        self.model_spec()
            .validate()
            .map_err(|e| field_error("model", e))?;
        self.grid_spec().validate().map_err(|e| field_error("grid", e))
    }

    pub fn head_spec(&self) -> HeadSpec {
        match self.head.variant {
            HeadVariant::Ci => HeadSpec::ci(),
            HeadVariant::Vemoe => HeadSpec::vemoe(self.head.k),
            HeadVariant::VemoeLora => HeadSpec::lora(self.head.k, self.head.p),
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            backbone: self.model.backbone,
            lookback: self.window.lookback,
            horizon: self.window.horizon,
            kernel: self.model.kernel,
            cutoff: self.model.cutoff,
            head: self.head_spec(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch,
            seed: self.train.seed,
            adam: AdamConfig::with_lr(self.train.lr),
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            variants: self.grid.variants.clone(),
            k_set: self.grid.k_set.clone(),
            p_set: self.grid.p_set.clone(),
            seeds: self.grid.seeds.clone(),
            baseline: self.grid.baseline,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| VeError::Format(format!("serializing config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| VeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Resolves a dataset path: as given if it exists, otherwise under
/// [`DATA_DIR_ENV`] when that is set.
pub fn locate(path: &Path) -> PathBuf {
    if path.is_absolute() || path.exists() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}
