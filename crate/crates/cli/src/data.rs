//! Loading the series of an experiment.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ve_forecast::data::synthetic::grouped_dataset;
use ve_forecast::data::{chrono_split, load_csv, standardize_splits, subsample_channels, SplitSpec, Splits};
use ve_forecast::{Result, VeError};

use crate::config::{locate, DatasetConfig, DatasetKind};

/// Seed of the generated grouped series; independent of the training seed.
pub const GROUPED_DATA_SEED: u64 = 2021;

/// Segment files of a mixed-dataset directory.
pub const MIXED_SEGMENTS: [&str; 3] = ["train.csv", "val.csv", "test.csv"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Standardized splits plus provenance of the files they were read from.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub splits: Splits,
    pub inputs: Vec<InputFile>,
    pub labels: Vec<String>,
    /// Channels of the source kept after subsampling, if any were dropped.
    pub kept_channels: Option<Vec<usize>>,
}

pub fn hash_file(path: &Path) -> Result<InputFile> {
    let io = |e| VeError::Io {
        context: format!("read {}", path.display()),
        source: e,
    };
    let mut file = File::open(path).map_err(io)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(io)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(InputFile {
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
        bytes,
    })
}

fn required_path(cfg: &DatasetConfig) -> Result<PathBuf> {
    cfg.path
        .as_deref()
        .map(locate)
        .ok_or_else(|| VeError::Config("dataset.path: required".into()))
}

fn subsample(splits: Splits, fraction: Option<f64>) -> Result<(Splits, Option<Vec<usize>>)> {
    match fraction {
        Some(f) if f < 1.0 => {
            let keep = subsample_channels(splits.train.channels(), f);
            let pick = |ds: &ve_forecast::data::TimeSeriesDataset| ds.select_channels(&keep);
            let out = Splits {
                train: pick(&splits.train)?,
                val: pick(&splits.val)?,
                test: pick(&splits.test)?,
            };
            Ok((out, Some(keep)))
        }
        _ => Ok((splits, None)),
    }
}

/// Reads, splits, subsamples and standardizes the configured dataset.
pub fn load_experiment_data(cfg: &DatasetConfig) -> Result<LoadedData> {
    let (raw, inputs) = match cfg.kind {
        DatasetKind::Csv => {
            let path = required_path(cfg)?;
            let ds = load_csv(&path)?;
            let splits = chrono_split(&ds, &SplitSpec::for_dataset(&ds.name))?;
            (splits, vec![hash_file(&path)?])
        }
        DatasetKind::Mixed => {
            let dir = required_path(cfg)?;
            let mut parts = Vec::with_capacity(3);
            let mut inputs = Vec::with_capacity(3);
            for name in MIXED_SEGMENTS {
                let path = dir.join(name);
                parts.push(load_csv(&path)?);
                inputs.push(hash_file(&path)?);
            }
            let mut it = parts.into_iter();
            let splits = Splits {
                train: it.next().expect("train"),
                val: it.next().expect("val"),
                test: it.next().expect("test"),
            };
            (splits, inputs)
        }
        DatasetKind::Grouped => {
            let (ds, _) = grouped_dataset(cfg.rows, GROUPED_DATA_SEED);
            (chrono_split(&ds, &SplitSpec::standard())?, Vec::new())
        }
    };
    let (raw, kept_channels) = subsample(raw, cfg.channel_fraction)?;
    let labels = raw.train.channel_names.clone();
    let (splits, _) = standardize_splits(&raw)?;
    Ok(LoadedData {
        splits,
        inputs,
        labels,
        kept_channels,
    })
}
