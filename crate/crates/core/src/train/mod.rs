//! Optimization, evaluation and hyperparameter search.

mod adam;
mod grid;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use grid::{
    ablation_rows, format_grid_table, grid_search, grid_search_with, run_cell, summarize_grid, AblationRow,
    CellRecord, GridCell, GridEntry, GridResult, GridSpec, DEFAULT_K_SET, DEFAULT_P_SET,
};
pub use loss::mse_loss;
pub use trainer::{
    evaluate, multi_seed_run, summarize_seeds, train_from_spec, train_model, RunMetrics, SeedSummary, TrainConfig,
    DEFAULT_SEEDS,
};
