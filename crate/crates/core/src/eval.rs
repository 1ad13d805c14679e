//! Classification metrics, k-fold aggregation and one-tailed t-tests.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|l| **l).count();
    (pos, labels.len() - pos)
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// Mann–Whitney AUC: `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`, via average ranks.
pub fn roc_auc_binary(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Unweighted mean of one-vs-rest AUCs. Classes without positives (or
/// without negatives) in `labels` are skipped with a warning.
pub fn macro_ovr_auc(probabilities: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if probabilities.len() != labels.len() || labels.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} probability rows, {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    let k = probabilities[0].len();
    if k < 2 || probabilities.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidInput("probability rows need a common width ≥ 2".into()));
    }
    let mut aucs = Vec::with_capacity(k);
    let mut skipped = Vec::new();
    for c in 0..k {
        let ind: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        let (pos, neg) = class_counts(&ind);
        if pos == 0 || neg == 0 {
            skipped.push(c);
            continue;
        }
        let col: Vec<f64> = probabilities.iter().map(|r| r[c]).collect();
        aucs.push(roc_auc_binary(&col, &ind)?);
    }
    if !skipped.is_empty() {
        warn!("macro AUC: {} of {k} classes absent from labels, skipped: {skipped:?}", skipped.len());
    }
    if aucs.is_empty() {
        return Err(Error::InvalidInput("no class has both positives and negatives".into()));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// Index of the row maximum; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy_argmax(probabilities: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if probabilities.len() != labels.len() || labels.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} probability rows, {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    let hits = probabilities
        .iter()
        .zip(labels)
        .filter(|(r, &l)| argmax(r) == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `1 − EER`. Scores at or above a threshold count as positive; thresholds
/// run over the sorted unique scores plus +∞, and FPR = FNR is located by
/// linear interpolation between adjacent operating points.
pub fn eer_accuracy(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Operating points from lowest threshold up: (fpr, fnr).
    let mut points = Vec::new();
    let (mut neg_below, mut pos_below) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        points.push((1.0 - neg_below as f64 / neg as f64, pos_below as f64 / pos as f64));
        let t = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == t {
            if pairs[i].1 {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
    }
    points.push((0.0, 1.0));
    for w in points.windows(2) {
        let (f0, n0) = w[0];
        let (f1, n1) = w[1];
        let d0 = f0 - n0;
        let d1 = f1 - n1;
        if d0 == 0.0 {
            return Ok(1.0 - f0);
        }
        if d0 > 0.0 && d1 <= 0.0 {
            let t = d0 / (d0 - d1);
            return Ok(1.0 - (f0 + t * (f1 - f0)));
        }
    }
    // d is 1 at the lowest threshold and -1 at +∞, so a crossing always exists
    unreachable!("FPR − FNR changes sign between the extreme thresholds")
}

/// ROC operating points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per
/// distinct score used as a `score ≥ τ` threshold, highest first.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1 divisor).
    pub std: f64,
}

pub fn aggregate(values: &[f64]) -> Result<MeanStd> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "standard deviation needs at least 2 folds, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MeanStd { mean, std: var.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// `P(T ≥ t)` under the null; small when `mean(a) > mean(b)`.
    pub p: f64,
}

/// Pooled-variance two-sample Student t-test of `mean(a) > mean(b)`.
/// Zero pooled variance saturates: p = 0.5 for equal means, otherwise 0 or 1.
pub fn t_test_one_tailed(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("t-test needs at least 2 values per group".into()));
    }
    let (sa, sb) = (aggregate(a)?, aggregate(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * sa.std.powi(2) + (nb - 1.0) * sb.std.powi(2)) / df;
    let diff = sa.mean - sb.mean;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 || !se.is_finite() {
        let (t, p) = if diff == 0.0 {
            (0.0, 0.5)
        } else if diff > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        };
        return Ok(TTest { t, df, p });
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(TTest { t, df, p: dist.cdf(-t) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub auc: f64,
    pub accuracy: f64,
    pub n_test: usize,
}

/// Scores one test fold. Binary tasks use the positive-class column for the
/// AUC and report EER accuracy; multi-class tasks use macro one-vs-rest AUC
/// and argmax accuracy.
pub fn score_fold(fold: usize, probabilities: &[Vec<f64>], labels: &[usize]) -> Result<FoldReport> {
    let k = probabilities.first().map_or(0, Vec::len);
    let (auc, accuracy) = if k == 2 {
        let scores: Vec<f64> = probabilities.iter().map(|r| r[1]).collect();
        let truth: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        (roc_auc_binary(&scores, &truth)?, eer_accuracy(&scores, &truth)?)
    } else {
        (macro_ovr_auc(probabilities, labels)?, accuracy_argmax(probabilities, labels)?)
    };
    Ok(FoldReport {
        fold,
        auc,
        accuracy,
        n_test: labels.len(),
    })
}

/// Cross-validation outcome of one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSummary {
    pub arch: String,
    pub auc: MeanStd,
    pub accuracy: MeanStd,
    pub folds: Vec<FoldReport>,
}

impl ArchSummary {
    pub fn from_folds(arch: &str, folds: Vec<FoldReport>) -> Result<Self> {
        let aucs: Vec<f64> = folds.iter().map(|f| f.auc).collect();
        let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        Ok(Self {
            arch: arch.to_string(),
            auc: aggregate(&aucs)?,
            accuracy: aggregate(&accs)?,
            folds,
        })
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }
}

/// Per-architecture summaries of one task plus pairwise p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub task: String,
    pub archs: Vec<ArchSummary>,
    /// `p_values[i][j]`: one-tailed p of `acc(arch i) > acc(arch j)`; NaN on the diagonal.
    pub p_values: Vec<Vec<f64>>,
}

impl StudySummary {
    pub fn new(task: &str, archs: Vec<ArchSummary>) -> Result<Self> {
        let n = archs.len();
        let mut p_values = vec![vec![f64::NAN; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p_values[i][j] = t_test_one_tailed(&archs[i].accuracies(), &archs[j].accuracies())?.p;
                }
            }
        }
        Ok(Self {
            task: task.to_string(),
            archs,
            p_values,
        })
    }
}

pub const FOLD_CSV_HEADER: &str = "task,arch,fold,auc,acc,n_test";
pub const SUMMARY_CSV_HEADER: &str = "task,arch,auc_mean,auc_std,acc_mean,acc_std";

pub fn fold_csv(task: &str, arch: &str, folds: &[FoldReport]) -> String {
    let mut s = format!("{FOLD_CSV_HEADER}\n");
    for f in folds {
        let _ = writeln!(s, "{task},{arch},{},{},{},{}", f.fold, f.auc, f.accuracy, f.n_test);
    }
    s
}

pub fn summary_csv(summaries: &[StudySummary]) -> String {
    let mut s = format!("{SUMMARY_CSV_HEADER}\n");
    for study in summaries {
        for a in &study.archs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                study.task, a.arch, a.auc.mean, a.auc.std, a.accuracy.mean, a.accuracy.std
            );
        }
    }
    s
}

/// Square p-value matrix: rows are the hypothesised better architecture.
pub fn p_value_csv(study: &StudySummary) -> String {
    let mut s = String::from("arch");
    for a in &study.archs {
        let _ = write!(s, ",{}", a.arch);
    }
    s.push('\n');
    for (i, a) in study.archs.iter().enumerate() {
        s.push_str(&a.arch);
        for (j, p) in study.p_values[i].iter().enumerate() {
            if i == j {
                s.push_str(",-");
            } else {
                let _ = write!(s, ",{p:.3e}");
            }
        }
        s.push('\n');
    }
    s
}
