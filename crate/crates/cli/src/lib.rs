//! Command-line experiments: configuration, data loading and subcommands.

pub mod commands;
pub mod config;
pub mod data;

use ve_forecast::VeError;

/// Process exit status for an error: 2 configuration, 3 data, 4 numeric.
pub fn exit_code(err: &VeError) -> u8 {
    match err {
        VeError::Config(_) | VeError::Index(_) | VeError::Shape(_) => 2,
        VeError::Parse { .. } | VeError::Io { .. } | VeError::InsufficientData(_) | VeError::Format(_) => 3,
        VeError::Numeric(_) => 4,
    }
}
