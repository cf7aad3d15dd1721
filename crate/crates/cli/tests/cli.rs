use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use ve_forecast::backbone::{BackboneKind, ForecastModel, HeadSpec, ModelSpec};
use ve_forecast::data::synthetic::{sine_dataset, standin_dataset};
use ve_forecast::data::{chrono_split, load_csv, SplitSpec};
use ve_forecast::head::HeadVariant;
use ve_forecast::train::{CellRecord, GridCell, RunMetrics};
use ve_forecast_cli::commands::cell_file;
use ve_forecast_cli::config::{ConfigFile, DatasetKind, ExperimentConfig, Overrides};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ve-forecast"));
    c.env_remove("VE_FORECAST_DATA_DIR");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn sine_csv(dir: &Path, name: &str, rows: usize, channels: usize) -> PathBuf {
    let path = dir.join(name);
    sine_dataset(rows, channels, 24.0).write_csv(&path).unwrap();
    path
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, body).unwrap();
    path
}

fn small_config(data: &Path, out: &Path) -> String {
    format!(
        r#"
[dataset]
path = "{}"

[model]
backbone = "linear"

[head]
variant = "vemoe"
k = 2

[train]
seed = 2021
epochs = 2
lr = 0.005
batch = 32

[window]
lookback = 24
horizon = 6

[output]
dir = "{}"
"#,
        data.display(),
        out.display()
    )
}

#[test]
fn train_writes_artifacts_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let data = sine_csv(tmp.path(), "toy.csv", 600, 3);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let cfg = write_config(tmp.path(), &small_config(&data, out));
        assert!(run(bin().args(["train", "--config"]).arg(&cfg)).status.success());
    }
    for f in ["checkpoint.json", "metrics.json", "config.resolved.toml", "manifest.json", "timing.json"] {
        assert!(a.join(f).exists(), "missing {f}");
    }
    let metrics: RunMetrics = serde_json::from_str(&fs::read_to_string(a.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics.test_mse.is_finite());
    for f in ["metrics.json", "checkpoint.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("sha256") && manifest.contains("code_version"));

    // the resolved config reproduces the run
    let resolved = a.join("config.resolved.toml");
    let c = tmp.path().join("c");
    assert!(run(bin().args(["train", "--config"]).arg(&resolved).arg("--out").arg(&c)).status.success());
    assert_eq!(fs::read(a.join("metrics.json")).unwrap(), fs::read(c.join("metrics.json")).unwrap());
}

#[test]
fn eval_reproduces_the_training_test_score() {
    let tmp = TempDir::new().unwrap();
    let data = sine_csv(tmp.path(), "toy.csv", 600, 2);
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &small_config(&data, &out));
    assert!(run(bin().args(["train", "--config"]).arg(&cfg)).status.success());
    let ev = tmp.path().join("ev");
    let status = run(bin()
        .args(["eval", "--checkpoint"])
        .arg(out.join("checkpoint.json"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&ev));
    assert!(status.status.success());
    let metrics: RunMetrics = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(ev.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["test_mse"].as_f64().unwrap(), metrics.test_mse);
    assert_eq!(report["val_mse"].as_f64().unwrap(), metrics.val_mse);
}

fn full_file() -> ConfigFile {
    ConfigFile::parse(
        r#"
[dataset]
path = "file.csv"
kind = "csv"
rows = 100
channel_fraction = 0.5
[model]
backbone = "dlinear"
kernel = 5
cutoff = 10
[head]
variant = "vemoe"
k = 3
p = 2.0
[train]
seed = 1
epochs = 2
lr = 0.01
batch = 8
[window]
lookback = 48
horizon = 12
[grid]
k_set = [2]
p_set = [1.0]
seeds = [5]
variants = ["vemoe"]
baseline = false
[output]
dir = "from_file"
"#,
        "test",
    )
    .unwrap()
}

#[test]
fn flags_override_file_values_field_by_field() {
    type Case = (fn(&mut Overrides), fn(&ExperimentConfig) -> String, &'static str, &'static str);
    let cases: Vec<Case> = vec![
        (|o| o.data = Some("flag.csv".into()), |c| c.dataset.path.as_ref().unwrap().display().to_string(), "file.csv", "flag.csv"),
        (|o| o.kind = Some(DatasetKind::Mixed), |c| format!("{:?}", c.dataset.kind), "Csv", "Mixed"),
        (|o| o.rows = Some(7), |c| c.dataset.rows.to_string(), "100", "7"),
        (|o| o.channel_fraction = Some(0.25), |c| format!("{:?}", c.dataset.channel_fraction), "Some(0.5)", "Some(0.25)"),
        (|o| o.backbone = Some(BackboneKind::Linear), |c| c.model.backbone.to_string(), "dlinear", "linear"),
        (|o| o.kernel = Some(7), |c| c.model.kernel.to_string(), "5", "7"),
        (|o| o.cutoff = Some(11), |c| format!("{:?}", c.model.cutoff), "Some(10)", "Some(11)"),
        (|o| o.head = Some(HeadVariant::VemoeLora), |c| c.head.variant.as_str().into(), "vemoe", "vemoe_lora"),
        (|o| o.k = Some(8), |c| c.head.k.to_string(), "3", "8"),
        (|o| o.p = Some(0.25), |c| c.head.p.to_string(), "2", "0.25"),
        (|o| o.seed = Some(9), |c| c.train.seed.to_string(), "1", "9"),
        (|o| o.epochs = Some(4), |c| c.train.epochs.to_string(), "2", "4"),
        (|o| o.lr = Some(0.1), |c| c.train.lr.to_string(), "0.01", "0.1"),
        (|o| o.batch = Some(16), |c| c.train.batch.to_string(), "8", "16"),
        (|o| o.lookback = Some(96), |c| c.window.lookback.to_string(), "48", "96"),
        (|o| o.horizon = Some(24), |c| c.window.horizon.to_string(), "12", "24"),
        (|o| o.k_set = Some(vec![4, 8]), |c| format!("{:?}", c.grid.k_set), "[2]", "[4, 8]"),
        (|o| o.p_set = Some(vec![4.0]), |c| format!("{:?}", c.grid.p_set), "[1.0]", "[4.0]"),
        (|o| o.seeds = Some(vec![6, 7]), |c| format!("{:?}", c.grid.seeds), "[5]", "[6, 7]"),
        (|o| o.variants = Some(vec![HeadVariant::VemoeLora]), |c| format!("{:?}", c.grid.variants), "[Vemoe]", "[VemoeLora]"),
        (|o| o.baseline = Some(true), |c| c.grid.baseline.to_string(), "false", "true"),
        (|o| o.out = Some("from_flag".into()), |c| c.output.dir.display().to_string(), "from_file", "from_flag"),
    ];
    let base = ExperimentConfig::resolve(&full_file()).unwrap();
    for (set, get, from_file, from_flag) in cases {
        assert_eq!(get(&base), from_file);
        let mut file = full_file();
        let mut o = Overrides::default();
        set(&mut o);
        o.apply(&mut file);
        let cfg = ExperimentConfig::resolve(&file).unwrap();
        assert_eq!(get(&cfg), from_flag);
        // everything else keeps its file value
        assert_eq!(toml_diff_count(&cfg, &base), 1, "override {from_flag} changed more than one field");
    }
}

fn toml_diff_count(a: &ExperimentConfig, b: &ExperimentConfig) -> usize {
    let ta = a.to_toml().unwrap();
    let tb = b.to_toml().unwrap();
    ta.lines().zip(tb.lines()).filter(|(x, y)| x != y).count() + ta.lines().count().abs_diff(tb.lines().count())
}

#[test]
fn defaults_apply_when_neither_flag_nor_file_sets_a_field() {
    let mut file = ConfigFile::default();
    Overrides {
        kind: Some(DatasetKind::Grouped),
        ..Default::default()
    }
    .apply(&mut file);
    let cfg = ExperimentConfig::resolve(&file).unwrap();
    assert_eq!((cfg.train.seed, cfg.train.epochs, cfg.train.batch), (2021, 10, 32));
    assert_eq!(cfg.train.lr, 5e-3);
    assert_eq!(cfg.head.variant, HeadVariant::Ci);
}

#[test]
fn head_flags_override_the_file_on_the_command_line() {
    let tmp = TempDir::new().unwrap();
    let data = sine_csv(tmp.path(), "toy.csv", 600, 2);
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), &small_config(&data, &out));
    let s = run(bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--head", "vemoe_lora", "--k", "8", "--p", "0.25", "--epochs", "1"]));
    assert!(s.status.success());
    let resolved = fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    let r = ExperimentConfig::from_toml(&resolved).unwrap();
    assert_eq!((r.head.variant, r.head.k, r.head.p), (HeadVariant::VemoeLora, 8, 0.25));
    let ck = ForecastModel::load(&out.join("checkpoint.json")).unwrap();
    assert_eq!(ck.head_variant(), HeadVariant::VemoeLora);
}

#[test]
fn invalid_config_exits_with_a_field_message() {
    let tmp = TempDir::new().unwrap();
    let data = sine_csv(tmp.path(), "toy.csv", 200, 1);
    let cfg = write_config(tmp.path(), &small_config(&data, tmp.path()).replace("\nk = 2\n", "\nk = 0\n"));
    let out = run(bin().args(["train", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("head.k"));

    let cfg = write_config(tmp.path(), "[train]\nepochz = 3\n");
    let out = run(bin().args(["train", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochz"));
}

#[test]
fn data_errors_exit_three_and_numeric_errors_exit_four() {
    let tmp = TempDir::new().unwrap();
    let out = run(bin().args(["train", "--data"]).arg(tmp.path().join("missing.csv")));
    assert_eq!(out.status.code(), Some(3));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "date,a\n0,1\n1,x\n").unwrap();
    let out = run(bin().args(["train", "--data"]).arg(&bad));
    assert_eq!(out.status.code(), Some(3));

    // a huge learning rate on a steep series overflows the loss
    let data = tmp.path().join("steep.csv");
    let mut text = String::from("date,a\n");
    for t in 0..400 {
        text.push_str(&format!("{t},{}\n", if t % 2 == 0 { 1e150 } else { -1e150 }));
    }
    fs::write(&data, text).unwrap();
    let out = run(bin()
        .args(["train", "--data"])
        .arg(&data)
        .args(["--lookback", "8", "--horizon", "4", "--lr", "1e200", "--epochs", "3"])
        .arg("--out")
        .arg(tmp.path().join("o")));
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn data_dir_variable_resolves_relative_paths() {
    let tmp = TempDir::new().unwrap();
    sine_csv(tmp.path(), "toy.csv", 300, 1);
    let out = tmp.path().join("run");
    let s = run(bin()
        .env("VE_FORECAST_DATA_DIR", tmp.path())
        .current_dir(std::env::temp_dir())
        .args(["train", "--data", "toy.csv", "--lookback", "24", "--horizon", "4", "--epochs", "1"])
        .arg("--out")
        .arg(&out));
    assert!(s.status.success());
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains(&tmp.path().join("toy.csv").display().to_string()));
}

fn grid_args(data: &Path, out: &Path) -> Vec<String> {
    grid_args_with(data, out, 24, 6)
}

fn grid_args_with(data: &Path, out: &Path, lookback: usize, horizon: usize) -> Vec<String> {
    [
        "grid-search",
        "--data",
        &data.display().to_string(),
        "--lookback",
        &lookback.to_string(),
        "--horizon",
        &horizon.to_string(),
        "--epochs",
        "1",
        "--out",
        &out.display().to_string(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn one_by_one_grid_writes_a_single_record() {
    let tmp = TempDir::new().unwrap();
    let data = sine_csv(tmp.path(), "toy.csv", 400, 2);
    let out = tmp.path().join("grid");
    let s = run(bin()
        .args(grid_args(&data, &out))
        .args(["--k-set", "4", "--p-set", "1", "--seeds", "2021", "--baseline", "false"]));
    assert!(s.status.success());
    assert_eq!(fs::read_dir(out.join("cells")).unwrap().count(), 1);
    let grid: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("grid.json")).unwrap()).unwrap();
    assert_eq!(grid["entries"].as_array().unwrap().len(), 1);
}

#[test]
fn grid_resumes_from_existing_cell_files_and_jobs_do_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let data = sine_csv(tmp.path(), "toy.csv", 400, 2);
    let args = ["--k-set", "2,4", "--p-set", "1", "--seeds", "1,2"];

    let serial = tmp.path().join("serial");
    assert!(run(bin().args(grid_args(&data, &serial)).args(args)).status.success());
    let parallel = tmp.path().join("parallel");
    assert!(run(bin().args(grid_args(&data, &parallel)).args(args).args(["--jobs", "3"])).status.success());
    assert_eq!(
        fs::read(serial.join("grid.json")).unwrap(),
        fs::read(parallel.join("grid.json")).unwrap()
    );

    // plant a finished record with a distinctive score; the resumed run must keep it
    let resumed = tmp.path().join("resumed");
    fs::create_dir_all(resumed.join("cells")).unwrap();
    let cell = GridCell {
        variant: HeadVariant::VemoeLora,
        k: 4,
        p: Some(1.0),
    };
    let planted = |seed| CellRecord {
        cell,
        seed,
        metrics: Some(RunMetrics {
            test_mse: 123.0,
            val_mse: -1.0,
            param_count: 1,
            seed,
            train_loss: vec![],
            val_history: vec![-1.0],
            wall_clock_seconds: 0.0,
        }),
        error: None,
    };
    for seed in [1, 2] {
        fs::write(cell_file(&resumed, &cell, seed), serde_json::to_string(&planted(seed)).unwrap()).unwrap();
    }
    assert!(run(bin().args(grid_args(&data, &resumed)).args(args)).status.success());
    let grid: serde_json::Value = serde_json::from_str(&fs::read_to_string(resumed.join("grid.json")).unwrap()).unwrap();
    assert_eq!(grid["chosen"]["k"], 4);
    let entry = grid["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["cell"]["k"] == 4)
        .unwrap();
    assert_eq!(entry["test_mse"].as_f64(), Some(123.0));
    assert_eq!(fs::read_dir(resumed.join("cells")).unwrap().count(), 2 * 3);
}

#[test]
fn full_grid_on_frequency_backbone_gives_ablation_rows() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("ETTh2.csv");
    standin_dataset("ETTh2", 600, 7, 60, 0, 3).write_csv(&data).unwrap();
    let out = tmp.path().join("grid");
    let s = run(bin()
        .args(grid_args_with(&data, &out, 48, 12))
        .args(["--backbone", "fits", "--variants", "vemoe,vemoe_lora", "--seeds", "2021"]));
    assert!(s.status.success());
    assert_eq!(fs::read_dir(out.join("cells")).unwrap().count(), 1 + 7 + 21);
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let labels: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels.len(), 11);
    assert_eq!(labels[0], "baseline");
    for (i, k) in [2, 4, 8, 16, 32, 64, 128].iter().enumerate() {
        assert_eq!(labels[1 + i], format!("vemoe k={k}"));
    }
    for (i, p) in ["0.25", "1", "4"].iter().enumerate() {
        assert!(labels[8 + i].starts_with(&format!("vemoe_lora p={p} ")), "{}", labels[8 + i]);
    }
}

fn write_sources(dir: &Path, scale: usize) -> [PathBuf; 4] {
    let shapes = [("ETTh1", 17420, 7, 60), ("ETTh2", 17420, 7, 60), ("electricity", 26304, 321, 60), ("weather", 52696, 21, 10)];
    let mut out = Vec::new();
    for (i, (name, rows, channels, step)) in shapes.into_iter().enumerate() {
        let path = dir.join(format!("{name}.csv"));
        let channels = if scale > 1 { channels.min(3) } else { channels };
        standin_dataset(name, rows / scale, channels, step, 0, i as u64).write_csv(&path).unwrap();
        out.push(path);
    }
    out.try_into().unwrap()
}

#[test]
fn prepare_mixed_layout_lengths_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let sources = write_sources(tmp.path(), 20);
    let mixed = |out: &Path| {
        let mut cmd = bin();
        cmd.arg("prepare-mixed");
        for (flag, p) in ["--etth1", "--etth2", "--ecl", "--weather"].iter().zip(&sources) {
            cmd.arg(flag).arg(p);
        }
        run(cmd.arg("--out").arg(out))
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(mixed(&a).status.success());
    assert!(mixed(&b).status.success());
    for f in ["train.csv", "val.csv", "test.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let ett = chrono_split(&load_csv(&sources[0]).unwrap(), &SplitSpec::ett()).unwrap();
    let train = load_csv(a.join("train.csv")).unwrap();
    assert_eq!(train.channels(), 12);
    assert_eq!(train.len(), ett.train.len());
    assert_eq!(load_csv(a.join("val.csv")).unwrap().len(), ett.val.len());
    assert_eq!(load_csv(a.join("test.csv")).unwrap().len(), ett.test.len());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["blocks"][2]["first"], 6);
    assert_eq!(m["blocks"][3]["last"], 11);

    // training on the mixed directory works
    let s = run(bin()
        .args(["train", "--kind", "mixed", "--data"])
        .arg(&a)
        .args(["--lookback", "24", "--horizon", "6", "--epochs", "1", "--head", "vemoe"])
        .arg("--out")
        .arg(tmp.path().join("run")));
    assert!(s.status.success());

    let mut cmd = bin();
    cmd.arg("prepare-mixed").arg("--etth1").arg(tmp.path().join("absent.csv"));
    for (flag, p) in ["--etth2", "--ecl", "--weather"].iter().zip(&sources[1..]) {
        cmd.arg(flag).arg(p);
    }
    let out = run(cmd.arg("--out").arg(tmp.path().join("c")));
    assert_eq!(out.status.code(), Some(3));
}

fn save_model(dir: &Path, head: HeadSpec, channels: usize) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = ForecastModel::new(&ModelSpec::new(BackboneKind::Linear, 16, 4, head), channels, &mut rng).unwrap();
    let path = dir.join("checkpoint.json");
    model.save(&path).unwrap();
    path
}

fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn analyze_exports_and_rejects_channel_independent_heads() {
    let tmp = TempDir::new().unwrap();
    let ck = save_model(tmp.path(), HeadSpec::vemoe(1), 6);
    let out = tmp.path().join("k1");
    assert!(run(bin().args(["analyze", "--checkpoint"]).arg(&ck).arg("--out").arg(&out)).status.success());
    for row in read_matrix(&out.join("similarity.csv")) {
        assert!(row.iter().all(|v| (v.abs() - 1.0).abs() < 1e-12), "{row:?}");
    }

    let wide = TempDir::new().unwrap();
    let ck = save_model(wide.path(), HeadSpec::lora(8, 1.0), 356);
    let out = wide.path().join("range");
    let s = run(bin()
        .args(["analyze", "--checkpoint"])
        .arg(&ck)
        .args(["--variates", "351-355", "--out"])
        .arg(&out));
    assert!(s.status.success());
    let sim = read_matrix(&out.join("similarity.csv"));
    assert_eq!((sim.len(), sim[0].len()), (5, 5));
    let gates = read_matrix(&out.join("gates.csv"));
    assert_eq!((gates.len(), gates[0].len()), (5, 8));

    let ci = TempDir::new().unwrap();
    let ck = save_model(ci.path(), HeadSpec::ci(), 3);
    let out = run(bin().args(["analyze", "--checkpoint"]).arg(&ck).arg("--out").arg(ci.path().join("o")));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channel-independent"));
}
