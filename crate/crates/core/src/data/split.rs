use serde::{Deserialize, Serialize};

use super::dataset::TimeSeriesDataset;
use crate::error::{Result, VeError};

/// Guard added to every standard deviation denominator.
pub const STD_EPSILON: f64 = 1e-5;

/// Chronological train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
}

impl SplitSpec {
    pub fn new(train_ratio: f64, val_ratio: f64, test_ratio: f64) -> Result<Self> {
        let s = Self {
            train_ratio,
            val_ratio,
            test_ratio,
        };
        s.validate()?;
        Ok(s)
    }

    /// 6:2:2, used for the ETT family.
    pub fn ett() -> Self {
        Self {
            train_ratio: 0.6,
            val_ratio: 0.2,
            test_ratio: 0.2,
        }
    }

    /// 7:1:2, used for every other dataset.
    pub fn standard() -> Self {
        Self {
            train_ratio: 0.7,
            val_ratio: 0.1,
            test_ratio: 0.2,
        }
    }

    /// Ratio convention for a dataset name.
    pub fn for_dataset(name: &str) -> Self {
        if name.to_ascii_uppercase().starts_with("ETT") {
            Self::ett()
        } else {
            Self::standard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = [self.train_ratio, self.val_ratio, self.test_ratio];
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(VeError::Config(format!("split ratios must be nonnegative: {r:?}")));
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(VeError::Config(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// `(train_end, val_end)` row indices for a series of `total` rows; the
    /// test segment takes the remainder.
    pub fn boundaries(&self, total: usize) -> (usize, usize) {
        let floor = |r: f64| ((r * total as f64) + 1e-9).floor() as usize;
        let train = floor(self.train_ratio).min(total);
        let val = floor(self.val_ratio).min(total - train);
        (train, train + val)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

/// Contiguous chronological segments of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: TimeSeriesDataset,
    pub val: TimeSeriesDataset,
    pub test: TimeSeriesDataset,
}

impl Splits {
    pub fn part(&self, part: SplitPart) -> &TimeSeriesDataset {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Val => &self.val,
            SplitPart::Test => &self.test,
        }
    }

    /// The segment prefixed with up to `lookback` rows of the segments
    /// preceding it, so that its first window can forecast its first row.
    pub fn with_context(&self, part: SplitPart, lookback: usize) -> Result<TimeSeriesDataset> {
        let preceding = match part {
            SplitPart::Train => return Ok(self.train.clone()),
            SplitPart::Val => self.train.clone(),
            SplitPart::Test => self.train.concat_rows(&self.val)?,
        };
        let take = lookback.min(preceding.len());
        let head = preceding.slice_rows(preceding.len() - take..preceding.len());
        head.concat_rows(self.part(part))
    }

    pub fn map(&self, mut f: impl FnMut(&TimeSeriesDataset) -> TimeSeriesDataset) -> Self {
        Self {
            train: f(&self.train),
            val: f(&self.val),
            test: f(&self.test),
        }
    }
}

/// Cuts `ds` into train, validation and test segments in time order.
pub fn chrono_split(ds: &TimeSeriesDataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let (a, b) = spec.boundaries(ds.len());
    Ok(Splits {
        train: ds.slice_rows(0..a),
        val: ds.slice_rows(a..b),
        test: ds.slice_rows(b..ds.len()),
    })
}

/// Per-channel affine scaling fitted on one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation of each channel.
    pub fn fit(train: &TimeSeriesDataset) -> Result<Self> {
        if train.is_empty() {
            return Err(VeError::InsufficientData("cannot standardize on an empty train split".into()));
        }
        let n = train.len() as f64;
        let c = train.channels();
        let mut means = vec![0.0; c];
        for t in 0..train.len() {
            for (m, &v) in means.iter_mut().zip(train.values.row(t)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; c];
        for t in 0..train.len() {
            for ((s, &v), &m) in vars.iter_mut().zip(train.values.row(t)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars.iter().map(|s| (s / n).sqrt()).collect();
        Ok(Self { means, stds })
    }

    pub fn transform(&self, ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        if ds.channels() != self.means.len() {
            return Err(VeError::shape(format!(
                "standardizer fitted on {} channels applied to {}",
                self.means.len(),
                ds.channels()
            )));
        }
        let mut out = ds.clone();
        let c = ds.channels();
        for (i, v) in out.values.as_mut_slice().iter_mut().enumerate() {
            let j = i % c;
            *v = (*v - self.means[j]) / self.stds[j].max(STD_EPSILON);
        }
        Ok(out)
    }
}

/// Scales `train` and every dataset in `others` with statistics of `train` only.
pub fn standardize(
    train: &TimeSeriesDataset,
    others: &[&TimeSeriesDataset],
) -> Result<(TimeSeriesDataset, Vec<TimeSeriesDataset>, Standardizer)> {
    let scaler = Standardizer::fit(train)?;
    let train_out = scaler.transform(train)?;
    let rest = others.iter().map(|d| scaler.transform(d)).collect::<Result<_>>()?;
    Ok((train_out, rest, scaler))
}

/// Standardizes all three segments with train statistics.
pub fn standardize_splits(splits: &Splits) -> Result<(Splits, Standardizer)> {
    let (train, rest, scaler) = standardize(&splits.train, &[&splits.val, &splits.test])?;
    let mut rest = rest.into_iter();
    Ok((
        Splits {
            train,
            val: rest.next().expect("val"),
            test: rest.next().expect("test"),
        },
        scaler,
    ))
}
