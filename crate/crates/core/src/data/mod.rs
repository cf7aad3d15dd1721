//! Loading, splitting, windowing and normalizing multivariate series.

mod dataset;
mod mixed;
mod revin;
mod split;
pub mod synthetic;
mod window;

pub use dataset::{load_csv, TimeSeriesDataset};
pub use mixed::{build_mixed_dataset, subsample_channels, ChannelBlock, MixStrategy, MixedDataset};
pub use revin::{revin_denormalize, revin_normalize, RevInState};
pub use split::{
    chrono_split, standardize, standardize_splits, SplitPart, SplitSpec, Splits, Standardizer,
    STD_EPSILON,
};
pub use window::{make_windows, WindowBatch, WindowIndex};
