use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ve_forecast::data::MixStrategy;
use ve_forecast::Result;
use ve_forecast_cli::commands::{
    cmd_analyze, cmd_eval, cmd_grid, cmd_prepare_mixed, cmd_train, format_report, parse_variate_range, read_labels,
    MIXED_SOURCES,
};
use ve_forecast_cli::config::{ExperimentConfig, Overrides};
use ve_forecast_cli::exit_code;

#[derive(Parser)]
#[command(name = "ve-forecast", version, about = "Train and analyze forecasters with variate-embedded heads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Strategy {
    Aligned,
    PerSplit,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write checkpoint, metrics and resolved config.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score a checkpoint on the validation and test segments.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train every head of the grid, resuming from existing cell records.
    GridSearch {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parallel workers.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Build the 356-channel mixed dataset from its four sources.
    PrepareMixed {
        #[arg(long, default_value = MIXED_SOURCES[0])]
        etth1: PathBuf,
        #[arg(long, default_value = MIXED_SOURCES[1])]
        etth2: PathBuf,
        #[arg(long, default_value = MIXED_SOURCES[2])]
        ecl: PathBuf,
        #[arg(long, default_value = MIXED_SOURCES[3])]
        weather: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "aligned")]
        strategy: Strategy,
    },
    /// Export embedding similarity, gates and weight magnitudes of a checkpoint.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Inclusive variate range such as `351-355`.
        #[arg(long)]
        variates: Option<String>,
        /// CSV whose header names the variates.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train { config, overrides } => {
            let cfg = ExperimentConfig::from_sources(config.as_deref(), &overrides)?;
            let m = cmd_train(&cfg)?;
            Ok(format!(
                "test_mse {:.6} val_mse {:.6} params {} -> {}",
                m.test_mse,
                m.val_mse,
                m.param_count,
                cfg.output.dir.display()
            ))
        }
        Command::Eval {
            checkpoint,
            config,
            overrides,
        } => {
            let cfg = ExperimentConfig::from_sources(config.as_deref(), &overrides)?;
            let r = cmd_eval(&cfg, &checkpoint)?;
            Ok(format!("test_mse {:.6} val_mse {:.6}", r.test_mse, r.val_mse))
        }
        Command::GridSearch { config, jobs, overrides } => {
            let cfg = ExperimentConfig::from_sources(config.as_deref(), &overrides)?;
            let r = cmd_grid(&cfg, jobs)?;
            Ok(format_report(&r))
        }
        Command::PrepareMixed {
            etth1,
            etth2,
            ecl,
            weather,
            out,
            strategy,
        } => {
            let strategy = match strategy {
                Strategy::Aligned => MixStrategy::AlignedBorders,
                Strategy::PerSplit => MixStrategy::PerSplit,
            };
            let m = cmd_prepare_mixed(&[etth1, etth2, ecl, weather], &out, strategy)?;
            let blocks: Vec<String> = m.blocks.iter().map(|b| format!("{} {}-{}", b.source, b.first, b.last)).collect();
            Ok(format!(
                "{} channels ({}), rows {}/{}/{} -> {}",
                m.channels,
                blocks.join(", "),
                m.rows.train,
                m.rows.val,
                m.rows.test,
                out.display()
            ))
        }
        Command::Analyze {
            checkpoint,
            out,
            variates,
            labels,
        } => {
            let range = variates.as_deref().map(parse_variate_range).transpose()?;
            let labels = labels.as_deref().map(read_labels).transpose()?;
            let m = cmd_analyze(&checkpoint, &out, range, labels)?;
            let mut s = format!("{} artifacts -> {}", m.artifacts.len(), out.display());
            for w in &m.warnings {
                s.push_str(&format!("\nwarning: {w}"));
            }
            Ok(s)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
