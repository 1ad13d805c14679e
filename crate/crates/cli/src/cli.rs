//! Command-line surface.

use std::path::PathBuf;

use cfan_core::dataset::Task;
use cfan_core::models::Architecture;
use clap::{Args, Parser, Subcommand};
use log::{error, warn};

use crate::config::{FileConfig, ModelOverrides, TrainOverrides};
use crate::crossval::{cmd_crossval, RunOptions};
use crate::prepare::{cmd_prepare, PrepareOptions};
use crate::report::cmd_report;
use crate::Result;

/// Exit status when a prepared corpus misses its reference counts.
pub const EXIT_COUNT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cfan", version, about = "ECG segment preparation, cross-validation studies and reports")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a PhysioNet database into a binary cache plus a count report.
    Prepare(PrepareArgs),
    /// Train and score every architecture on every fold.
    Crossval(Box<CrossvalArgs>),
    /// Merge finished studies into architecture-by-task tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub task: Task,
    /// Directory with the downloaded WFDB files.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Where the cache and report go.
    #[arg(long)]
    pub out: PathBuf,
    /// Exit successfully even when segment counts miss the reference targets.
    #[arg(long)]
    pub no_count_check: bool,
    /// Do not verify files against SHA256SUMS.txt.
    #[arg(long)]
    pub skip_checksums: bool,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    /// TOML study file; flags given here override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<Task>,
    /// Architecture to evaluate; repeat or separate with commas. Default: all four.
    #[arg(long = "arch", value_delimiter = ',')]
    pub archs: Vec<Architecture>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory holding the prepared `<task>.seg` cache.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Samples per forward pass; batches are accumulated from these.
    #[arg(long)]
    pub micro_batch: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Apnea ablation preset 0..=7 used instead of the task's architecture.
    #[arg(long = "arch-version")]
    pub version: Option<u8>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub kernel: Option<usize>,
    /// Widths of the two hidden dense layers.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub fc_units: Option<Vec<usize>>,
    /// Fold trainings to run concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Train just this fold (0-based); the summary waits for all folds.
    #[arg(long)]
    pub only_fold: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A study directory, or a directory whose subdirectories are studies.
    #[arg(long)]
    pub out: PathBuf,
}

impl CrossvalArgs {
    fn as_file_config(&self) -> FileConfig {
        FileConfig {
            task: self.task,
            archs: (!self.archs.is_empty()).then(|| self.archs.clone()),
            folds: self.folds,
            seed: self.seed,
            data_dir: self.data_dir.clone(),
            out: self.out.clone(),
            jobs: self.jobs,
            train: TrainOverrides {
                epochs: self.epochs,
                patience: self.patience,
                batch_size: self.batch_size,
                micro_batch: self.micro_batch,
                learning_rate: self.learning_rate,
            },
            model: ModelOverrides {
                version: self.version,
                filters: self.filters,
                kernel: self.kernel,
                fc_units: self.fc_units.as_ref().map(|v| [v[0], v[1]]),
            },
        }
    }
}

/// Runs one command; returns the process exit status.
pub fn run(cli: Cli, invocation: Vec<String>) -> Result<i32> {
    match cli.command {
        Command::Prepare(a) => {
            let opts = PrepareOptions {
                verify_checksums: !a.skip_checksums,
            };
            let outcome = cmd_prepare(a.task, &a.data_dir, &a.out, opts)?;
            print!("{}", outcome.report);
            if outcome.violations.is_empty() || a.no_count_check {
                for v in &outcome.violations {
                    warn!("{v}");
                }
                Ok(0)
            } else {
                for v in &outcome.violations {
                    error!("{v}");
                }
                Ok(EXIT_COUNT_MISMATCH)
            }
        }
        Command::Crossval(a) => {
            let (file, text) = match &a.config {
                Some(p) => {
                    let (f, t) = FileConfig::load(p)?;
                    (f, Some(t))
                }
                None => (FileConfig::default(), None),
            };
            let (cfg, jobs) = file.resolve(&a.as_file_config())?;
            let opts = RunOptions {
                jobs: jobs.unwrap_or(1),
                only_fold: a.only_fold,
                invocation,
                config_file: text,
            };
            let outcome = cmd_crossval(&cfg, &opts)?;
            println!(
                "{} folds trained, {} reused; results in {}",
                outcome.trained,
                outcome.skipped,
                cfg.out_dir.display()
            );
            if let Some(s) = &outcome.summary {
                print!("{}", cfan_core::eval::summary_csv(std::slice::from_ref(s)));
            }
            Ok(0)
        }
        Command::Report(a) => {
            let r = cmd_report(&a.out)?;
            print!("{}", r.text);
            Ok(0)
        }
    }
}
