use std::path::{Path, PathBuf};

use cfan_core::models::Architecture;
use serde::{Deserialize, Serialize};

use crate::config::StudyConfig;
use crate::error::{CliError, Result};
use crate::fsutil::{read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldStatus {
    Pending,
    Done,
}

/// One (architecture, fold) training job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldEntry {
    pub arch: Architecture,
    pub fold: usize,
    pub model_seed: u64,
    pub train_seed: u64,
    pub status: FoldStatus,
    /// Result file relative to the output directory, once done.
    pub result: Option<String>,
}

/// Study state written next to the results; enough to resume or rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config: StudyConfig,
    /// The TOML study file verbatim, when one was given.
    pub config_file: Option<String>,
    /// Command lines of every invocation that touched this directory.
    pub invocations: Vec<Vec<String>>,
    pub fold_seed: u64,
    pub cache_sha256: String,
    pub folds: Vec<FoldEntry>,
}

impl Manifest {
    pub fn path(out_dir: &Path) -> PathBuf {
        out_dir.join(MANIFEST_FILE)
    }

    pub fn load(out_dir: &Path) -> Result<Option<Self>> {
        let p = Self::path(out_dir);
        if !p.is_file() {
            return Ok(None);
        }
        read_json(&p).map(Some)
    }

    pub fn save(&self) -> Result<()> {
        write_json(&Self::path(&self.config.out_dir), self)
    }

    pub fn entry_mut(&mut self, arch: Architecture, fold: usize) -> Option<&mut FoldEntry> {
        self.folds.iter_mut().find(|e| e.arch == arch && e.fold == fold)
    }

    /// Errors unless `config` describes the same study over the same data.
    pub fn check_compatible(&self, config: &StudyConfig, cache_sha256: &str) -> Result<()> {
        // the same study may be reached through a differently spelled path
        let mut same = config.clone();
        same.out_dir = self.config.out_dir.clone();
        same.data_dir = self.config.data_dir.clone();
        if self.config != same {
            return Err(CliError::Usage(format!(
                "{} holds a study with a different configuration; choose another --out",
                self.config.out_dir.display()
            )));
        }
        if self.cache_sha256 != cache_sha256 {
            return Err(CliError::Usage(format!(
                "segment cache changed since the study in {} started",
                self.config.out_dir.display()
            )));
        }
        Ok(())
    }
}
