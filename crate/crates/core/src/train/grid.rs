use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::trainer::{train_from_spec, RunMetrics, TrainConfig};
use crate::backbone::{HeadSpec, ModelSpec};
use crate::data::Splits;
use crate::error::{Result, VeError};
use crate::head::HeadVariant;

/// Expert counts searched by default.
pub const DEFAULT_K_SET: [usize; 7] = [2, 4, 8, 16, 32, 64, 128];
/// Expansion ratios searched by default.
pub const DEFAULT_P_SET: [f64; 3] = [0.25, 1.0, 4.0];

/// One head configuration of a grid. `p` is set only for factorized experts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub variant: HeadVariant,
    pub k: usize,
    pub p: Option<f64>,
}

impl GridCell {
    pub fn baseline() -> Self {
        Self {
            variant: HeadVariant::Ci,
            k: 1,
            p: None,
        }
    }

    pub fn head_spec(&self) -> HeadSpec {
        match self.variant {
            HeadVariant::Ci => HeadSpec::ci(),
            HeadVariant::Vemoe => HeadSpec::vemoe(self.k),
            HeadVariant::VemoeLora => HeadSpec::lora(self.k, self.p.unwrap_or(1.0)),
        }
    }

    /// File-name friendly identifier, e.g. `vemoe_lora-k8-p0.25`.
    pub fn key(&self) -> String {
        match (self.variant, self.p) {
            (HeadVariant::Ci, _) => "ci".to_string(),
            (v, None) => format!("{}-k{}", v.as_str(), self.k),
            (v, Some(p)) => format!("{}-k{}-p{}", v.as_str(), self.k, p),
        }
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub variants: Vec<HeadVariant>,
    pub k_set: Vec<usize>,
    pub p_set: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Also train the channel-independent head.
    pub baseline: bool,
}

impl GridSpec {
    /// Factorized experts over every `(k, p)` pair.
    pub fn lora(k_set: Vec<usize>, p_set: Vec<f64>, seeds: Vec<u64>) -> Self {
        Self {
            variants: vec![HeadVariant::VemoeLora],
            k_set,
            p_set,
            seeds,
            baseline: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() || self.variants.is_empty() {
            return Err(VeError::Config("grid needs at least one seed and one head variant".into()));
        }
        let needs_k = self.variants.iter().any(|v| *v != HeadVariant::Ci);
        if needs_k && (self.k_set.is_empty() || self.k_set.contains(&0)) {
            return Err(VeError::Config("k_set must be nonempty and positive".into()));
        }
        if self.variants.contains(&HeadVariant::VemoeLora)
            && (self.p_set.is_empty() || self.p_set.iter().any(|p| !(*p > 0.0 && p.is_finite())))
        {
            return Err(VeError::Config("p_set must be nonempty and positive".into()));
        }
        Ok(())
    }

    /// Every configuration to train, baseline first.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        if self.baseline || self.variants.contains(&HeadVariant::Ci) {
            out.push(GridCell::baseline());
        }
        for &variant in &self.variants {
            match variant {
                HeadVariant::Ci => {}
                HeadVariant::Vemoe => out.extend(self.k_set.iter().map(|&k| GridCell { variant, k, p: None })),
                HeadVariant::VemoeLora => {
                    for &k in &self.k_set {
                        out.extend(self.p_set.iter().map(|&p| GridCell { variant, k, p: Some(p) }));
                    }
                }
            }
        }
        out
    }
}

/// Outcome of training one cell with one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: GridCell,
    pub seed: u64,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

impl CellRecord {
    pub fn from_result(cell: GridCell, seed: u64, result: Result<RunMetrics>) -> Self {
        match result {
            Ok(m) => Self {
                cell,
                seed,
                metrics: Some(m),
                error: None,
            },
            Err(e) => Self {
                cell,
                seed,
                metrics: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Seed-averaged scores of one cell. A cell with any failed seed is
/// reported but never chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub cell: GridCell,
    pub val_mse: f64,
    pub test_mse: f64,
    pub test_mse_std: f64,
    pub param_count: usize,
    pub seeds: Vec<u64>,
    pub failures: Vec<String>,
}

impl GridEntry {
    pub fn ok(&self) -> bool {
        self.failures.is_empty() && !self.seeds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
    pub chosen: GridCell,
}

impl GridResult {
    pub fn entry(&self, cell: &GridCell) -> Option<&GridEntry> {
        self.entries.iter().find(|e| e.cell == *cell)
    }

    pub fn chosen_entry(&self) -> &GridEntry {
        self.entry(&self.chosen).expect("chosen cell has an entry")
    }

    /// Best successful entry among those accepted by `filter`.
    pub fn best_where(&self, filter: impl Fn(&GridEntry) -> bool) -> Option<&GridEntry> {
        self.entries.iter().filter(|e| e.ok() && filter(e)).min_by(|a, b| compare(a, b))
    }
}

/// Validation MSE, then parameter count, then expert count.
fn compare(a: &GridEntry, b: &GridEntry) -> Ordering {
    a.val_mse
        .total_cmp(&b.val_mse)
        .then(a.param_count.cmp(&b.param_count))
        .then(a.cell.k.cmp(&b.cell.k))
}

/// Averages records per cell in the order given by `cells` and selects by
/// validation MSE. Test scores never influence the choice.
pub fn summarize_grid(cells: &[GridCell], records: &[CellRecord]) -> Result<GridResult> {
    let mut entries = Vec::with_capacity(cells.len());
    for cell in cells {
        let mine: Vec<&CellRecord> = records.iter().filter(|r| r.cell == *cell).collect();
        let ok: Vec<&RunMetrics> = mine.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let failures: Vec<String> = mine
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| format!("seed {}: {e}", r.seed)))
            .collect();
        let n = ok.len().max(1) as f64;
        let val = ok.iter().map(|m| m.val_mse).sum::<f64>() / n;
        let test = ok.iter().map(|m| m.test_mse).sum::<f64>() / n;
        let std = (ok.iter().map(|m| (m.test_mse - test).powi(2)).sum::<f64>() / n).sqrt();
        entries.push(GridEntry {
            cell: *cell,
            val_mse: if ok.is_empty() { f64::NAN } else { val },
            test_mse: if ok.is_empty() { f64::NAN } else { test },
            test_mse_std: if ok.is_empty() { f64::NAN } else { std },
            param_count: ok.first().map_or(0, |m| m.param_count),
            seeds: ok.iter().map(|m| m.seed).collect(),
            failures,
        });
    }
    let chosen = entries
        .iter()
        .filter(|e| e.ok())
        .min_by(|a, b| compare(a, b))
        .map(|e| e.cell)
        .ok_or_else(|| VeError::Numeric("every grid cell failed".into()))?;
    Ok(GridResult { entries, chosen })
}

/// Evaluates every cell for every seed with `run` and summarizes. Failures
/// are recorded per cell and do not stop the search.
pub fn grid_search_with(
    grid: &GridSpec,
    mut run: impl FnMut(&GridCell, u64) -> Result<RunMetrics>,
) -> Result<GridResult> {
    grid.validate()?;
    let cells = grid.cells();
    let mut records = Vec::with_capacity(cells.len() * grid.seeds.len());
    for cell in &cells {
        for &seed in &grid.seeds {
            records.push(CellRecord::from_result(*cell, seed, run(cell, seed)));
        }
    }
    summarize_grid(&cells, &records)
}

/// Trains `base` with every head of the grid on the same splits.
pub fn grid_search(base: &ModelSpec, splits: &Splits, grid: &GridSpec, train: &TrainConfig) -> Result<GridResult> {
    grid_search_with(grid, |cell, seed| run_cell(base, splits, cell, seed, train))
}

pub fn run_cell(base: &ModelSpec, splits: &Splits, cell: &GridCell, seed: u64, train: &TrainConfig) -> Result<RunMetrics> {
    let spec = ModelSpec {
        head: cell.head_spec(),
        ..*base
    };
    let config = TrainConfig { seed, ..*train };
    train_from_spec(&spec, splits, &config).map(|(_, m)| m)
}

/// One row of an ablation over heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub variant: HeadVariant,
    pub k: usize,
    pub p: Option<f64>,
    pub param_count: usize,
    pub val_mse: f64,
    pub test_mse: f64,
}

impl AblationRow {
    fn from_entry(label: String, e: &GridEntry) -> Self {
        Self {
            label,
            variant: e.cell.variant,
            k: e.cell.k,
            p: e.cell.p,
            param_count: e.param_count,
            val_mse: e.val_mse,
            test_mse: e.test_mse,
        }
    }
}

/// Baseline, every full-rank `k`, then the validation-best `k` for each
/// expansion ratio of the factorized experts.
pub fn ablation_rows(result: &GridResult) -> Vec<AblationRow> {
    let mut rows = Vec::new();
    if let Some(e) = result.entry(&GridCell::baseline()).filter(|e| e.ok()) {
        rows.push(AblationRow::from_entry("baseline".into(), e));
    }
    for e in result.entries.iter().filter(|e| e.ok() && e.cell.variant == HeadVariant::Vemoe) {
        rows.push(AblationRow::from_entry(format!("vemoe k={}", e.cell.k), e));
    }
    let mut ps: Vec<f64> = result
        .entries
        .iter()
        .filter(|e| e.cell.variant == HeadVariant::VemoeLora)
        .filter_map(|e| e.cell.p)
        .collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    for p in ps {
        if let Some(e) = result.best_where(|e| e.cell.variant == HeadVariant::VemoeLora && e.cell.p == Some(p)) {
            rows.push(AblationRow::from_entry(format!("vemoe_lora p={p} (k={})", e.cell.k), e));
        }
    }
    rows
}

/// Plain-text table of grid entries.
pub fn format_grid_table(result: &GridResult) -> String {
    let mut s = format!("{:<28} {:>12} {:>10} {:>10} {:>10}\n", "cell", "params", "val_mse", "test_mse", "test_std");
    for e in &result.entries {
        let mark = if e.cell == result.chosen { " *" } else { "" };
        if e.ok() {
            s.push_str(&format!(
                "{:<28} {:>12} {:>10.5} {:>10.5} {:>10.5}{mark}\n",
                e.cell.key(),
                e.param_count,
                e.val_mse,
                e.test_mse,
                e.test_mse_std
            ));
        } else {
            s.push_str(&format!("{:<28} failed: {}\n", e.cell.key(), e.failures.join("; ")));
        }
    }
    s
}
