//! Channel-independent forecasting backbones whose final projection is a
//! pluggable head.

mod decomp;
mod fits;
mod model;

pub use decomp::{decompose, moving_average, DEFAULT_KERNEL};
pub use fits::{default_cutoff, extend_series, output_bins, validate_cutoff};
pub use model::{
    dlinear_forward, fits_forward, linear_forward, BackboneKind, DLinearBackbone, FitsBackbone, ForecastModel,
    HeadSpec, LinearBackbone, ModelCache, ModelSpec,
};
