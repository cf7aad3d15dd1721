//! Implementation of each subcommand.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ve_forecast::analysis::{export_analysis, fingerprint, AnalysisManifest, AnalysisOptions};
use ve_forecast::backbone::ForecastModel;
use ve_forecast::data::{build_mixed_dataset, load_csv, ChannelBlock, MixStrategy, SplitPart};
use ve_forecast::train::{
    ablation_rows, evaluate, format_grid_table, run_cell, summarize_grid, train_from_spec, CellRecord, GridCell,
    GridResult, RunMetrics,
};
use ve_forecast::{Result, VeError};

use crate::config::{locate, ExperimentConfig};
use crate::data::{hash_file, load_experiment_data, InputFile, LoadedData, MIXED_SEGMENTS};

/// Version string recorded in every manifest.
pub fn code_version() -> String {
    format!("ve-forecast {}", env!("CARGO_PKG_VERSION"))
}

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> VeError {
    move |source| VeError::Io { context, source }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(format!("create {}", dir.display())))
}

/// Writes through a temporary file so that readers never see partial content.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, contents).map_err(io_err(format!("write {}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(io_err(format!("rename {}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| VeError::Format(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(format!("read {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| VeError::Format(format!("{}: {e}", path.display())))
}

/// Describes an artifact directory: what produced it and from which inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config_sha256: String,
    pub inputs: Vec<InputFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kept_channels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_fingerprint: Option<String>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

fn write_run_metadata(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    data: &LoadedData,
    model_fingerprint: Option<String>,
    artifacts: &[&str],
    started: Instant,
) -> Result<()> {
    let toml = cfg.to_toml()?;
    write_atomic(&dir.join("config.resolved.toml"), toml.as_bytes())?;
    let manifest = RunManifest {
        command: command.into(),
        code_version: code_version(),
        config_sha256: hex::encode(Sha256::digest(toml.as_bytes())),
        inputs: data.inputs.clone(),
        kept_channels: data.kept_channels.clone(),
        model_fingerprint,
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(
        &dir.join("timing.json"),
        &Timing {
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    )
}

/// Trains one model and writes its checkpoint, metrics, resolved config and manifest.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<RunMetrics> {
    let started = Instant::now();
    let data = load_experiment_data(&cfg.dataset)?;
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let (model, metrics) = train_from_spec(&cfg.model_spec(), &data.splits, &cfg.train_config())?;
    model.save(&dir.join("checkpoint.json"))?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    write_run_metadata(
        dir,
        "train",
        cfg,
        &data,
        Some(fingerprint(&model)?),
        &["checkpoint.json", "metrics.json", "config.resolved.toml", "timing.json"],
        started,
    )?;
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub checkpoint: String,
    pub model_fingerprint: String,
    pub val_mse: f64,
    pub test_mse: f64,
}

/// Scores a checkpoint on the validation and test segments of the configured dataset.
/// The window shape comes from the checkpoint.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<EvalReport> {
    let started = Instant::now();
    let model = ForecastModel::load(checkpoint)?;
    let data = load_experiment_data(&cfg.dataset)?;
    if let Some(c) = model.channels() {
        if c != data.splits.train.channels() {
            return Err(VeError::Shape(format!(
                "checkpoint has {c} variates, dataset has {}",
                data.splits.train.channels()
            )));
        }
    }
    let l = model.lookback();
    let report = EvalReport {
        checkpoint: checkpoint.display().to_string(),
        model_fingerprint: fingerprint(&model)?,
        val_mse: evaluate(&model, &data.splits.with_context(SplitPart::Val, l)?)?,
        test_mse: evaluate(&model, &data.splits.with_context(SplitPart::Test, l)?)?,
    };
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    write_json(&dir.join("eval.json"), &report)?;
    let mut resolved = cfg.clone();
    resolved.window.lookback = l;
    resolved.window.horizon = model.horizon();
    write_run_metadata(
        dir,
        "eval",
        &resolved,
        &data,
        Some(report.model_fingerprint.clone()),
        &["eval.json", "config.resolved.toml", "timing.json"],
        started,
    )?;
    Ok(report)
}

/// File of one grid record.
pub fn cell_file(dir: &Path, cell: &GridCell, seed: u64) -> PathBuf {
    dir.join("cells").join(format!("{}-seed{seed}.json", cell.key()))
}

/// Runs every missing `(cell, seed)` pair of the grid with up to `jobs`
/// workers, writing each record as soon as it finishes, then summarizes.
pub fn cmd_grid(cfg: &ExperimentConfig, jobs: usize) -> Result<GridResult> {
    let started = Instant::now();
    let grid = cfg.grid_spec();
    grid.validate()?;
    let data = load_experiment_data(&cfg.dataset)?;
    let dir = &cfg.output.dir;
    create_dir(&dir.join("cells"))?;
    let cells = grid.cells();
    let base = cfg.model_spec();
    let train = cfg.train_config();

    let mut records: Vec<CellRecord> = Vec::new();
    let mut pending: Vec<(GridCell, u64)> = Vec::new();
    for cell in &cells {
        for &seed in &grid.seeds {
            let path = cell_file(dir, cell, seed);
            match path.exists().then(|| read_json::<CellRecord>(&path)) {
                Some(Ok(r)) if r.cell == *cell && r.seed == seed => records.push(r),
                _ => pending.push((*cell, seed)),
            }
        }
    }

    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(pending.len()));
    let first_error: Mutex<Option<VeError>> = Mutex::new(None);
    let workers = jobs.clamp(1, pending.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(cell, seed)) = pending.get(i) else { break };
                let record = CellRecord::from_result(cell, seed, run_cell(&base, &data.splits, &cell, seed, &train));
                match write_json(&cell_file(dir, &cell, seed), &record) {
                    Ok(()) => done.lock().expect("record lock").push(record),
                    Err(e) => {
                        first_error.lock().expect("error lock").get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("error lock") {
        return Err(e);
    }
    records.extend(done.into_inner().expect("record lock"));

    let result = summarize_grid(&cells, &records)?;
    write_json(&dir.join("grid.json"), &result)?;
    write_atomic(&dir.join("grid.txt"), format_grid_table(&result).as_bytes())?;
    write_atomic(&dir.join("ablation.csv"), ablation_csv(&result).as_bytes())?;
    write_run_metadata(
        dir,
        "grid-search",
        cfg,
        &data,
        None,
        &["cells/", "grid.json", "grid.txt", "ablation.csv", "config.resolved.toml", "timing.json"],
        started,
    )?;
    Ok(result)
}

/// Ablation rows as CSV with a header.
pub fn ablation_csv(result: &GridResult) -> String {
    let mut s = String::from("label,variant,k,p,param_count,val_mse,test_mse\n");
    for r in ablation_rows(result) {
        let p = r.p.map(|p| p.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{p},{},{},{}\n",
            r.label,
            r.variant.as_str(),
            r.k,
            r.param_count,
            r.val_mse,
            r.test_mse
        ));
    }
    s
}

/// Default file names of the four mixed-dataset sources.
pub const MIXED_SOURCES: [&str; 4] = ["ETTh1.csv", "ETTh2.csv", "electricity.csv", "weather.csv"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub source: String,
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedManifest {
    pub code_version: String,
    pub strategy: MixStrategy,
    pub channels: usize,
    pub rows: SegmentRows,
    pub blocks: Vec<ChannelBlock>,
    pub sources: Vec<SourceEntry>,
    pub segments: Vec<InputFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRows {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Builds the mixed dataset from ETTh1, ETTh2, ECL and Weather files and
/// writes its three segments with a block manifest. Output depends only on
/// the input bytes.
pub fn cmd_prepare_mixed(sources: &[PathBuf; 4], out: &Path, strategy: MixStrategy) -> Result<MixedManifest> {
    let paths: Vec<PathBuf> = sources.iter().map(|p| locate(p)).collect();
    let mut loaded = Vec::with_capacity(4);
    let mut entries = Vec::with_capacity(4);
    for (path, label) in paths.iter().zip(["ETTh1", "ETTh2", "ECL", "Weather"]) {
        let ds = load_csv(path)?;
        entries.push(SourceEntry {
            source: label.into(),
            file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            sha256: hash_file(path)?.sha256,
            rows: ds.len(),
            channels: ds.channels(),
        });
        loaded.push(ds);
    }
    let mix = build_mixed_dataset(&loaded[0], &loaded[1], &loaded[2], &loaded[3], strategy)?;
    create_dir(out)?;
    let mut segments = Vec::with_capacity(3);
    for (name, part) in MIXED_SEGMENTS.iter().zip([SplitPart::Train, SplitPart::Val, SplitPart::Test]) {
        let path = out.join(name);
        mix.splits.part(part).write_csv(&path)?;
        let mut hashed = hash_file(&path)?;
        hashed.path = (*name).to_string();
        segments.push(hashed);
    }
    let manifest = MixedManifest {
        code_version: code_version(),
        strategy,
        channels: mix.splits.train.channels(),
        rows: SegmentRows {
            train: mix.splits.train.len(),
            val: mix.splits.val.len(),
            test: mix.splits.test.len(),
        },
        blocks: mix.blocks,
        sources: entries,
        segments,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Parses `a-b` (inclusive) or a single index into a half-open range.
pub fn parse_variate_range(text: &str) -> Result<std::ops::Range<usize>> {
    let bad = || VeError::Config(format!("--variates: expected `first-last` or an index, got {text:?}"));
    let (a, b) = match text.split_once('-') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (text.trim(), text.trim()),
    };
    let a: usize = a.parse().map_err(|_| bad())?;
    let b: usize = b.parse().map_err(|_| bad())?;
    if b < a {
        return Err(bad());
    }
    Ok(a..b + 1)
}

/// Reads the channel names from the header of a dataset CSV.
pub fn read_labels(path: &Path) -> Result<Vec<String>> {
    let path = locate(path);
    let file = fs::File::open(&path).map_err(io_err(format!("open {}", path.display())))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(io_err(format!("read {}", path.display())))?;
    Ok(header.trim_end().split(',').skip(1).map(|s| s.trim().to_string()).collect())
}

/// Exports similarity, gate and weight-magnitude matrices of a checkpoint.
pub fn cmd_analyze(
    checkpoint: &Path,
    out: &Path,
    variates: Option<std::ops::Range<usize>>,
    labels: Option<Vec<String>>,
) -> Result<AnalysisManifest> {
    let model = ForecastModel::load(checkpoint)?;
    let channels = model.channels().ok_or_else(|| {
        VeError::Config(format!(
            "{} has a channel-independent head: there is no variate embedding to analyze",
            checkpoint.display()
        ))
    })?;
    create_dir(out)?;
    let options = AnalysisOptions {
        variates: variates.unwrap_or(0..channels),
        labels,
    };
    export_analysis(&model, &options, out)
}

/// Grid table followed by the chosen cell.
pub fn format_report(result: &GridResult) -> String {
    format!("{}chosen {}", format_grid_table(result), result.chosen)
}
