use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cfan_core::dataset::{self, Task};
use log::info;

use crate::checksum::verify_dir;
use crate::config::cache_path;
use crate::error::{CliError, Result};
use crate::fsutil::atomic_write;
use crate::targets::count_violations;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrepareOptions {
    pub verify_checksums: bool,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self { verify_checksums: true }
    }
}

#[derive(Debug, Clone)]
pub struct PrepareOutcome {
    pub cache: PathBuf,
    pub report_path: PathBuf,
    pub report: String,
    /// Missed count targets; empty when the corpus matches.
    pub violations: Vec<String>,
}

/// Segments one database under `data_dir` into `<out_dir>/<task>.seg` and
/// writes `<out_dir>/<task>-report.txt` with per-class counts.
pub fn cmd_prepare(task: Task, data_dir: &Path, out_dir: &Path, opts: PrepareOptions) -> Result<PrepareOutcome> {
    let started = Instant::now();
    let missing = dataset::missing_inputs(task, data_dir);
    if !missing.is_empty() {
        return Err(CliError::Usage(format!(
            "{} is missing {} of the expected {task} inputs (fetch them with scripts/fetch_data.sh): {}",
            data_dir.display(),
            missing.len(),
            missing.join(" ")
        )));
    }
    let verified = if opts.verify_checksums { verify_dir(data_dir)? } else { None };
    let prepared = dataset::prepare(task, data_dir)?;
    let violations = count_violations(&prepared.set);

    let mut report = prepared.report;
    match verified {
        Some(n) => {
            let _ = writeln!(report, "checksums verified\t{n}");
        }
        None => report.push_str("checksums verified\tnone\n"),
    }
    if violations.is_empty() {
        report.push_str("count check\tpass\n");
    } else {
        for v in &violations {
            let _ = writeln!(report, "count check failed\t{v}");
        }
    }

    let cache = cache_path(out_dir, task);
    let mut bytes = Vec::new();
    prepared.set.write_to(&mut bytes)?;
    atomic_write(&cache, &bytes)?;
    let report_path = out_dir.join(format!("{task}-report.txt"));
    atomic_write(&report_path, report.as_bytes())?;
    info!(
        "{task}: {} segments to {} in {:.1}s",
        prepared.set.segments.len(),
        cache.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(PrepareOutcome {
        cache,
        report_path,
        report,
        violations,
    })
}
