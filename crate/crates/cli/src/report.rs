//! Consolidated architecture-by-task tables over finished studies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cfan_core::dataset::Task;
use cfan_core::eval::{summary_csv, ArchSummary, MeanStd, StudySummary};
use cfan_core::models::Architecture;
use log::warn;

use crate::crossval::{StudyRecord, STUDY_FILE};
use crate::error::{io_err, CliError, Result};
use crate::fsutil::{atomic_write, read_json};

pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";

#[derive(Debug, Clone)]
pub struct Report {
    pub studies: Vec<StudySummary>,
    pub text: String,
    pub csv: String,
}

/// `root/study.json` and `root/*/study.json`, sorted by path.
pub fn find_studies(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    if root.join(STUDY_FILE).is_file() {
        found.push(root.join(STUDY_FILE));
    }
    let entries = std::fs::read_dir(root).map_err(io_err(root))?;
    for e in entries {
        let p = e.map_err(io_err(root))?.path().join(STUDY_FILE);
        if p.is_file() {
            found.push(p);
        }
    }
    found.sort();
    Ok(found)
}

fn task_rank(task: &str) -> usize {
    task.parse::<Task>()
        .ok()
        .and_then(|t| Task::ALL.iter().position(|x| *x == t))
        .unwrap_or(Task::ALL.len())
}

fn arch_rank(arch: &str) -> usize {
    arch.parse::<Architecture>()
        .ok()
        .and_then(|a| Architecture::ALL.iter().position(|x| *x == a))
        .unwrap_or(Architecture::ALL.len())
}

fn arch_label(arch: &str) -> String {
    arch.parse::<Architecture>().map_or_else(|_| arch.to_string(), |a| a.label().to_string())
}

fn cell(m: Option<&MeanStd>) -> String {
    m.map_or_else(|| "-".to_string(), |m| format!("{:.2} ± {:.2}", m.mean * 100.0, m.std * 100.0))
}

/// Merges studies keyed by (task, architecture); the first study found in
/// path order wins a duplicate key.
pub fn merge(records: Vec<(PathBuf, StudyRecord)>) -> Result<Vec<StudySummary>> {
    let mut by_task: BTreeMap<(usize, String), Vec<ArchSummary>> = BTreeMap::new();
    for (path, rec) in records {
        let slot = by_task.entry((task_rank(&rec.task), rec.task.clone())).or_default();
        for a in rec.archs {
            if slot.iter().any(|x| x.arch == a.arch) {
                warn!("{}: {} {} already reported; ignored", path.display(), rec.task, a.arch);
                continue;
            }
            slot.push(a);
        }
    }
    let mut out = Vec::new();
    for ((_, task), mut archs) in by_task {
        archs.sort_by_key(|a| arch_rank(&a.arch));
        out.push(StudySummary::new(&task, archs)?);
    }
    Ok(out)
}

fn table(studies: &[StudySummary], title: &str, metric: impl Fn(&ArchSummary) -> &MeanStd) -> String {
    let mut archs: Vec<String> = studies.iter().flat_map(|s| s.archs.iter().map(|a| a.arch.clone())).collect();
    archs.sort_by_key(|a| (arch_rank(a), a.clone()));
    archs.dedup();
    let mut s = format!("{title}\n");
    let _ = write!(s, "{:<8}", "");
    for st in studies {
        let _ = write!(s, "{:>18}", st.task);
    }
    s.push('\n');
    for arch in &archs {
        let _ = write!(s, "{:<8}", arch_label(arch));
        for st in studies {
            let m = st.archs.iter().find(|a| &a.arch == arch).map(&metric);
            let _ = write!(s, "{:>18}", cell(m));
        }
        s.push('\n');
    }
    s
}

fn p_matrix(study: &StudySummary) -> String {
    let mut s = format!("p-values, {}: row architecture more accurate than column\n", study.task);
    let _ = write!(s, "{:<8}", "");
    for a in &study.archs {
        let _ = write!(s, "{:>11}", arch_label(&a.arch));
    }
    s.push('\n');
    for (i, a) in study.archs.iter().enumerate() {
        let _ = write!(s, "{:<8}", arch_label(&a.arch));
        for (j, p) in study.p_values[i].iter().enumerate() {
            let v = if i == j { "-".to_string() } else { format!("{p:.3e}") };
            let _ = write!(s, "{v:>11}");
        }
        s.push('\n');
    }
    s
}

pub fn render(studies: &[StudySummary]) -> String {
    let mut s = table(studies, "AUC (%, mean ± std over folds)", |a| &a.auc);
    s.push('\n');
    s.push_str(&table(studies, "Accuracy (%, mean ± std over folds)", |a| &a.accuracy));
    for st in studies.iter().filter(|st| st.archs.len() > 1) {
        s.push('\n');
        s.push_str(&p_matrix(st));
    }
    s
}

/// Renders every study under `root` into `report.txt` and `report.csv` there.
pub fn cmd_report(root: &Path) -> Result<Report> {
    let paths = find_studies(root)?;
    if paths.is_empty() {
        return Err(CliError::NoStudies(root.to_path_buf()));
    }
    let mut records = Vec::new();
    for p in paths {
        let rec: StudyRecord = read_json(&p)?;
        records.push((p, rec));
    }
    let studies = merge(records)?;
    let text = render(&studies);
    let csv = summary_csv(&studies);
    atomic_write(&root.join(REPORT_TEXT), text.as_bytes())?;
    atomic_write(&root.join(REPORT_CSV), csv.as_bytes())?;
    Ok(Report { studies, text, csv })
}
