use super::dataset::TimeSeriesDataset;
use crate::error::{Result, VeError};
use crate::numeric::Tensor3;

/// Input windows and the horizons that immediately follow them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub inputs: Tensor3,
    pub targets: Tensor3,
    pub lookback: usize,
    pub horizon: usize,
}

impl WindowBatch {
    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Start offsets of every window over a dataset, materialized on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowIndex {
    pub lookback: usize,
    pub horizon: usize,
    starts: Vec<usize>,
}

impl WindowIndex {
    pub fn new(rows: usize, lookback: usize, horizon: usize, stride: usize) -> Result<Self> {
        if lookback == 0 || stride == 0 {
            return Err(VeError::Config("lookback and stride must be positive".into()));
        }
        if rows < lookback + horizon {
            return Err(VeError::InsufficientData(format!(
                "{rows} rows cannot hold a lookback of {lookback} plus a horizon of {horizon}"
            )));
        }
        let count = (rows - lookback - horizon) / stride + 1;
        Ok(Self {
            lookback,
            horizon,
            starts: (0..count).map(|i| i * stride).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Copies the windows at positions `which` (indices into [`WindowIndex::starts`]).
    pub fn gather(&self, ds: &TimeSeriesDataset, which: &[usize]) -> WindowBatch {
        let c = ds.channels();
        let (l, h) = (self.lookback, self.horizon);
        let values = ds.values.as_slice();
        let mut inputs = Vec::with_capacity(which.len() * l * c);
        let mut targets = Vec::with_capacity(which.len() * h * c);
        for &w in which {
            let s = self.starts[w];
            inputs.extend_from_slice(&values[s * c..(s + l) * c]);
            targets.extend_from_slice(&values[(s + l) * c..(s + l + h) * c]);
        }
        WindowBatch {
            inputs: Tensor3::from_vec(which.len(), l, c, inputs).expect("sized"),
            targets: Tensor3::from_vec(which.len(), h, c, targets).expect("sized"),
            lookback: l,
            horizon: h,
        }
    }
}

/// All windows of `ds` with the given stride.
pub fn make_windows(ds: &TimeSeriesDataset, lookback: usize, horizon: usize, stride: usize) -> Result<WindowBatch> {
    let index = WindowIndex::new(ds.len(), lookback, horizon, stride)?;
    let all: Vec<usize> = (0..index.len()).collect();
    Ok(index.gather(ds, &all))
}
