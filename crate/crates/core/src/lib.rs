//! Variate-embedded final projections for channel-independent forecasters.

pub mod analysis;
pub mod backbone;
pub mod data;
pub mod error;
pub mod head;
pub mod numeric;
pub mod train;

pub use error::{Result, VeError};
