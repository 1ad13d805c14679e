//! k-fold cross-validation studies with per-fold resumption.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use cfan_core::dataset::{make_split, stratified_kfold, FoldPlan, SegmentSet};
use cfan_core::eval::{fold_csv, p_value_csv, roc_curve, score_fold, summary_csv, ArchSummary, FoldReport, StudySummary, FOLD_CSV_HEADER};
use cfan_core::models::{build_model, train, Architecture, Samples, TrainHistory};
use cfan_core::tensor::derive_seed;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::checksum::sha256_hex;
use crate::config::StudyConfig;
use crate::error::{io_err, CliError, Result};
use crate::fsutil::{atomic_write, read_json, write_json};
use crate::manifest::{FoldEntry, FoldStatus, Manifest};
use crate::svg::{accuracy_bars, roc_plot};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const FOLDS_FILE: &str = "folds.csv";
pub const P_VALUES_FILE: &str = "pvalues.csv";
pub const STUDY_FILE: &str = "study.json";
/// False-positive-rate grid of the macro-averaged multi-class ROC curve.
const ROC_GRID: usize = 101;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Concurrent fold trainings (at least 1).
    pub jobs: usize,
    pub only_fold: Option<usize>,
    pub invocation: Vec<String>,
    pub config_file: Option<String>,
}

/// Everything recorded about one trained fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub arch: Architecture,
    pub fold: usize,
    pub report: FoldReport,
    pub history: TrainHistory,
    pub n_train: usize,
    pub n_validation: usize,
    /// Test-set ROC points; macro-averaged over classes for multi-class tasks.
    pub roc: Vec<(f64, f64)>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CrossvalOutcome {
    pub results: Vec<FoldResult>,
    /// Present once every fold of every architecture is done.
    pub summary: Option<StudySummary>,
    pub trained: usize,
    pub skipped: usize,
}

/// Stored per-architecture summaries of a finished study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub task: String,
    pub archs: Vec<ArchSummary>,
}

fn stem(arch: Architecture, fold: usize) -> String {
    format!("{arch}-fold{fold}")
}

/// Per-job seeds depend on the architecture and fold only, so adding an
/// architecture to a study leaves the others' runs unchanged.
fn job_seeds(seed: u64, arch: Architecture, fold: usize) -> (u64, u64) {
    let arch_index = Architecture::ALL.iter().position(|a| *a == arch).unwrap_or(0) as u64;
    let model = derive_seed(seed, arch_index * 1_000_003 + fold as u64);
    (model, derive_seed(model, 1))
}

/// Linear interpolation of a monotone ROC polyline at `x`, taking the
/// upper end of vertical jumps.
fn tpr_at(points: &[(f64, f64)], x: f64) -> f64 {
    let mut best: f64 = 0.0;
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x < x0 || x > x1 {
            continue;
        }
        let y = if x1 == x0 { y1.max(y0) } else { y0 + (y1 - y0) * (x - x0) / (x1 - x0) };
        best = best.max(y);
    }
    best
}

pub fn fold_roc(probabilities: &[Vec<f64>], labels: &[usize]) -> Result<Vec<(f64, f64)>> {
    let k = probabilities.first().map_or(0, Vec::len);
    if k == 2 {
        let scores: Vec<f64> = probabilities.iter().map(|r| r[1]).collect();
        let truth: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        return Ok(roc_curve(&scores, &truth)?);
    }
    let mut curves = Vec::new();
    for c in 0..k {
        let truth: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        if truth.iter().all(|t| *t) || !truth.iter().any(|t| *t) {
            continue;
        }
        let scores: Vec<f64> = probabilities.iter().map(|r| r[c]).collect();
        curves.push(roc_curve(&scores, &truth)?);
    }
    if curves.is_empty() {
        return Err(CliError::Usage("no class has both positives and negatives in the test fold".into()));
    }
    let mut out = vec![(0.0, 0.0)];
    for i in 0..ROC_GRID {
        let x = i as f64 / (ROC_GRID - 1) as f64;
        let y = curves.iter().map(|c| tpr_at(c, x)).sum::<f64>() / curves.len() as f64;
        out.push((x, y));
    }
    Ok(out)
}

fn run_fold(cfg: &StudyConfig, set: &SegmentSet, plan: &FoldPlan, entry: &FoldEntry) -> Result<FoldResult> {
    let started = Instant::now();
    let split = make_split(plan, entry.fold)?;
    let train_set = Samples::select(&set.segments, &split.train);
    let validation = Samples::select(&set.segments, &split.validation);
    let test = Samples::select(&set.segments, &split.test);
    let mut model = build_model(&cfg.model_spec(entry.arch)?, entry.model_seed)?;
    let mut tc = cfg.train.clone();
    tc.seed = entry.train_seed;
    let label = format!("{} {} fold {}", cfg.task, entry.arch, entry.fold);
    info!(
        "{label}: training on {} segments, {} parameters",
        train_set.len(),
        model.params.scalar_count()
    );
    let history = train(&mut model, &train_set, &validation, &tc, |e| {
        if e.epoch % 10 == 0 {
            info!("{label}: epoch {} val loss {:.5} acc {:.4}", e.epoch, e.val_loss, e.val_accuracy);
        }
    })?;
    let probs = model.predict_raw(&test.inputs, tc.micro_batch)?;
    let report = score_fold(entry.fold, &probs, &test.labels)?;
    let roc = fold_roc(&probs, &test.labels)?;

    let out = &cfg.out_dir;
    let name = stem(entry.arch, entry.fold);
    atomic_write(&out.join("history").join(format!("{name}.csv")), history.to_csv().as_bytes())?;
    let mut ckpt = Vec::new();
    model.save_checkpoint(&mut ckpt)?;
    atomic_write(&out.join("checkpoints").join(format!("{name}.ckpt")), &ckpt)?;
    let title = format!("{} {} fold {} (AUC {:.4})", cfg.task, entry.arch.label(), entry.fold, report.auc);
    let plot = roc_plot(&title, &[(entry.arch.label().to_string(), roc.clone())]);
    atomic_write(&out.join("plots").join(format!("roc-{name}.svg")), plot.as_bytes())?;
    info!(
        "{label}: auc {:.4} accuracy {:.4} after {} epochs",
        report.auc,
        report.accuracy,
        history.epochs.len()
    );
    Ok(FoldResult {
        arch: entry.arch,
        fold: entry.fold,
        report,
        history,
        n_train: split.train.len(),
        n_validation: split.validation.len(),
        roc,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn load_result(out_dir: &Path, entry: &FoldEntry) -> Option<FoldResult> {
    if entry.status != FoldStatus::Done {
        return None;
    }
    let path = out_dir.join(entry.result.as_ref()?);
    match read_json::<FoldResult>(&path) {
        Ok(r) if r.arch == entry.arch && r.fold == entry.fold => Some(r),
        Ok(_) => None,
        Err(e) => {
            warn!("retraining {}: {e}", stem(entry.arch, entry.fold));
            None
        }
    }
}

fn new_manifest(cfg: &StudyConfig, opts: &RunOptions, cache_sha256: String) -> Manifest {
    let mut folds = Vec::new();
    for &arch in &cfg.archs {
        for fold in 0..cfg.folds {
            let (model_seed, train_seed) = job_seeds(cfg.seed, arch, fold);
            folds.push(FoldEntry {
                arch,
                fold,
                model_seed,
                train_seed,
                status: FoldStatus::Pending,
                result: None,
            });
        }
    }
    Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        config_file: opts.config_file.clone(),
        invocations: Vec::new(),
        fold_seed: cfg.seed,
        cache_sha256,
        folds,
    }
}

/// Trains and scores every (architecture, fold) pair not yet done, then
/// writes the fold, summary and p-value tables and the plots.
pub fn cmd_crossval(cfg: &StudyConfig, opts: &RunOptions) -> Result<CrossvalOutcome> {
    cfg.validate()?;
    let cache = cfg.cache_path();
    if !cache.is_file() {
        return Err(CliError::Usage(format!(
            "no segment cache at {}; run `cfan prepare --task {} --out {}` first",
            cache.display(),
            cfg.task,
            cfg.data_dir.display()
        )));
    }
    let bytes = std::fs::read(&cache).map_err(io_err(&cache))?;
    let cache_sha256 = sha256_hex(&bytes);
    let set = SegmentSet::read_from(&mut bytes.as_slice())?;
    if set.task != cfg.task {
        return Err(CliError::Usage(format!(
            "{} holds {} segments, not {}",
            cache.display(),
            set.task,
            cfg.task
        )));
    }
    let plan = stratified_kfold(&set.labels(), cfg.folds, cfg.seed)?;
    let selected: Vec<usize> = match opts.only_fold {
        Some(f) if f >= cfg.folds => {
            return Err(CliError::Usage(format!("--only-fold {f} is outside 0..{}", cfg.folds)));
        }
        Some(f) => vec![f],
        None => (0..cfg.folds).collect(),
    };

    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut manifest = match Manifest::load(&out)? {
        Some(m) => {
            m.check_compatible(cfg, &cache_sha256)?;
            m
        }
        None => new_manifest(cfg, opts, cache_sha256),
    };
    manifest.invocations.push(opts.invocation.clone());
    manifest.save()?;

    let mut done: Vec<FoldResult> = Vec::new();
    let mut queue = VecDeque::new();
    for entry in &manifest.folds {
        match load_result(&out, entry) {
            Some(r) => done.push(r),
            None if selected.contains(&entry.fold) => queue.push_back(entry.clone()),
            None => {}
        }
    }
    let skipped = done.iter().filter(|r| selected.contains(&r.fold)).count();
    let trained = queue.len();
    if skipped > 0 {
        info!("resuming: {skipped} completed folds reused, {trained} to train");
    }

    let queue = Mutex::new(queue);
    let manifest = Mutex::new(manifest);
    let fresh = Mutex::new(Vec::new());
    let failure: Mutex<Option<CliError>> = Mutex::new(None);
    let abort = AtomicBool::new(false);
    let workers = opts.jobs.max(1).min(trained.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let Some(entry) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let outcome = run_fold(cfg, &set, &plan, &entry).and_then(|r| {
                    let rel = format!("folds/{}.json", stem(entry.arch, entry.fold));
                    write_json(&out.join(&rel), &r)?;
                    let mut m = manifest.lock().unwrap();
                    if let Some(e) = m.entry_mut(entry.arch, entry.fold) {
                        e.status = FoldStatus::Done;
                        e.result = Some(rel);
                    }
                    m.save()?;
                    Ok(r)
                });
                match outcome {
                    Ok(r) => fresh.lock().unwrap().push(r),
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        failure.lock().unwrap().get_or_insert(e);
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    done.extend(fresh.into_inner().unwrap());
    let arch_rank = |a: Architecture| cfg.archs.iter().position(|x| *x == a).unwrap_or(usize::MAX);
    done.sort_by_key(|r| (arch_rank(r.arch), r.fold));

    write_tables(cfg, &done).map(|summary| CrossvalOutcome {
        results: done,
        summary,
        trained,
        skipped,
    })
}

fn write_tables(cfg: &StudyConfig, results: &[FoldResult]) -> Result<Option<StudySummary>> {
    let out = &cfg.out_dir;
    let task = cfg.task.name();
    let mut folds = format!("{FOLD_CSV_HEADER}\n");
    for &arch in &cfg.archs {
        let reports: Vec<FoldReport> = results.iter().filter(|r| r.arch == arch).map(|r| r.report).collect();
        folds.push_str(fold_csv(task, arch.name(), &reports).split_once('\n').map_or("", |(_, rows)| rows));
    }
    atomic_write(&out.join(FOLDS_FILE), folds.as_bytes())?;

    if results.len() < cfg.archs.len() * cfg.folds {
        info!(
            "{} of {} folds done; summary deferred until all are",
            results.len(),
            cfg.archs.len() * cfg.folds
        );
        return Ok(None);
    }
    let mut archs = Vec::new();
    for &arch in &cfg.archs {
        let mine: Vec<&FoldResult> = results.iter().filter(|r| r.arch == arch).collect();
        archs.push(ArchSummary::from_folds(arch.name(), mine.iter().map(|r| r.report).collect())?);
        let curves: Vec<(String, Vec<(f64, f64)>)> =
            mine.iter().map(|r| (format!("fold {}", r.fold), r.roc.clone())).collect();
        let plot = roc_plot(&format!("{task} {} ROC per fold", arch.label()), &curves);
        atomic_write(&out.join("plots").join(format!("roc-{arch}.svg")), plot.as_bytes())?;
    }
    let record = StudyRecord {
        task: task.to_string(),
        archs,
    };
    let summary = StudySummary::new(task, record.archs.clone())?;
    atomic_write(&out.join(SUMMARY_FILE), summary_csv(std::slice::from_ref(&summary)).as_bytes())?;
    atomic_write(&out.join(P_VALUES_FILE), p_value_csv(&summary).as_bytes())?;
    write_json(&out.join(STUDY_FILE), &record)?;
    let bars: Vec<(String, f64, f64)> = summary
        .archs
        .iter()
        .map(|a| (a.arch.to_uppercase(), a.accuracy.mean, a.accuracy.std))
        .collect();
    let plot = accuracy_bars(&format!("{task} accuracy (mean ± std over {} folds)", cfg.folds), &bars);
    atomic_write(&out.join("plots").join("accuracy.svg"), plot.as_bytes())?;
    let mut line = String::new();
    for a in &summary.archs {
        let _ = write!(line, " {} {:.4}±{:.4}", a.arch, a.accuracy.mean, a.accuracy.std);
    }
    info!("{task} accuracy:{line}");
    Ok(Some(summary))
}
