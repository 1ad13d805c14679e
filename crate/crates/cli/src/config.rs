//! Study configuration: defaults per task, an optional TOML file, and
//! command-line flags, merged in that order.

use std::path::{Path, PathBuf};

use cfan_core::dataset::Task;
use cfan_core::models::{build_model, ArchOptions, Architecture, ModelSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

/// Optional reshaping of the per-task architecture.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    /// Apnea ablation preset 0..=7 used as the base instead of the task default.
    pub version: Option<u8>,
    pub filters: Option<usize>,
    pub kernel: Option<usize>,
    pub fc_units: Option<[usize; 2]>,
}

impl ModelOverrides {
    pub fn options(&self, task: Task) -> Result<ArchOptions> {
        let base = match self.version {
            Some(v) => ArchOptions::version(v)?,
            None => ArchOptions::for_task(task),
        };
        if self.filters.is_none() && self.kernel.is_none() && self.fc_units.is_none() {
            return Ok(base);
        }
        let (f, k, fc) = (
            self.filters.unwrap_or(base.filters),
            self.kernel.unwrap_or(base.kernel),
            self.fc_units.unwrap_or(base.fc_units),
        );
        Ok(base.scaled(f, k, fc))
    }
}

/// Everything that determines the outcome of a cross-validation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub task: Task,
    pub archs: Vec<Architecture>,
    pub folds: usize,
    pub seed: u64,
    /// Directory holding the prepared segment cache.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
    pub model: ModelOverrides,
}

impl StudyConfig {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            archs: Architecture::ALL.to_vec(),
            folds: task.default_folds(),
            seed: 0,
            data_dir: PathBuf::from("."),
            out_dir: PathBuf::from("runs").join(task.name()),
            train: TrainConfig::for_task(task),
            model: ModelOverrides::default(),
        }
    }

    pub fn model_spec(&self, arch: Architecture) -> Result<ModelSpec> {
        Ok(ModelSpec::with_options(arch, self.task, &self.model.options(self.task)?)?)
    }

    pub fn cache_path(&self) -> PathBuf {
        cache_path(&self.data_dir, self.task)
    }

    pub fn validate(&self) -> Result<()> {
        if self.archs.is_empty() {
            return Err(CliError::Usage("no architectures selected".into()));
        }
        let mut seen = self.archs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.archs.len() {
            return Err(CliError::Usage("an architecture is listed twice".into()));
        }
        if self.folds < 2 {
            return Err(CliError::Usage(format!("fold count must be at least 2, got {}", self.folds)));
        }
        self.train.validate()?;
        for &a in &self.archs {
            build_model(&self.model_spec(a)?, self.seed)?;
        }
        Ok(())
    }
}

/// `<dir>/<task>.seg`
pub fn cache_path(dir: &Path, task: Task) -> PathBuf {
    dir.join(format!("{task}.seg"))
}

/// TOML study file. Every key is optional; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub task: Option<Task>,
    pub archs: Option<Vec<Architecture>>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub model: ModelOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub batch_size: Option<usize>,
    pub micro_batch: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl TrainOverrides {
    /// Fields set in `other` replace those set here.
    pub fn merged(&self, other: &TrainOverrides) -> TrainOverrides {
        TrainOverrides {
            epochs: other.epochs.or(self.epochs),
            patience: other.patience.or(self.patience),
            batch_size: other.batch_size.or(self.batch_size),
            micro_batch: other.micro_batch.or(self.micro_batch),
            learning_rate: other.learning_rate.or(self.learning_rate),
        }
    }

    pub fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            cfg.max_epochs = v;
            // a patience longer than the run is meaningless; clamp the default
            cfg.patience = cfg.patience.min(v);
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.micro_batch {
            cfg.micro_batch = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
    }
}

impl ModelOverrides {
    pub fn merged(&self, other: &ModelOverrides) -> ModelOverrides {
        ModelOverrides {
            version: other.version.or(self.version),
            filters: other.filters.or(self.filters),
            kernel: other.kernel.or(self.kernel),
            fc_units: other.fc_units.or(self.fc_units),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg = toml::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok((cfg, text))
    }

    /// Layers `flags` over `self` and both over the task defaults.
    pub fn resolve(&self, flags: &FileConfig) -> Result<(StudyConfig, Option<usize>)> {
        let task = flags
            .task
            .or(self.task)
            .ok_or_else(|| CliError::Usage("--task is required (or `task` in the config file)".into()))?;
        let mut cfg = StudyConfig::new(task);
        if let Some(a) = flags.archs.clone().or_else(|| self.archs.clone()) {
            cfg.archs = a;
        }
        if let Some(k) = flags.folds.or(self.folds) {
            cfg.folds = k;
        }
        if let Some(s) = flags.seed.or(self.seed) {
            cfg.seed = s;
        }
        if let Some(d) = flags.data_dir.clone().or_else(|| self.data_dir.clone()) {
            cfg.data_dir = d;
        }
        if let Some(o) = flags.out.clone().or_else(|| self.out.clone()) {
            cfg.out_dir = o;
        }
        self.train.merged(&flags.train).apply(&mut cfg.train);
        cfg.model = self.model.merged(&flags.model);
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok((cfg, flags.jobs.or(self.jobs)))
    }
}
