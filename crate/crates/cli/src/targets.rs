//! Reference segment counts each prepared corpus is checked against.

use cfan_core::dataset::{SegmentSet, Task};

pub const MITBIH_CLASS_COUNTS: [usize; 5] = [90_593, 2_781, 7_235, 802, 8_040];
pub const MITBIH_TOTAL: usize = 109_451;
pub const ECGID_TOTAL: usize = 2_456;
pub const ECGID_TOTAL_TOLERANCE: f64 = 0.01;
pub const ECGID_CLASSES: usize = 90;
pub const APNEA_TOTAL: usize = 15_880;
pub const APNEA_TOTAL_TOLERANCE: f64 = 0.02;
pub const APNEA_POSITIVES: usize = 5_925;
/// Absolute tolerance on the apnea fraction.
pub const APNEA_FRACTION_TOLERANCE: f64 = 0.02;

fn relative_gap(actual: usize, target: usize) -> f64 {
    (actual as f64 - target as f64).abs() / target as f64
}

/// Human-readable descriptions of every target the set misses.
pub fn count_violations(set: &SegmentSet) -> Vec<String> {
    let n = set.segments.len();
    let counts = set.class_counts();
    let mut out = Vec::new();
    match set.task {
        Task::Mitbih => {
            if n != MITBIH_TOTAL {
                out.push(format!("{n} segments, expected exactly {MITBIH_TOTAL}"));
            }
            for ((name, &got), want) in set.class_names.iter().zip(&counts).zip(MITBIH_CLASS_COUNTS) {
                if got != want {
                    out.push(format!("class {name}: {got} segments, expected exactly {want}"));
                }
            }
        }
        Task::Ecgid => {
            if relative_gap(n, ECGID_TOTAL) > ECGID_TOTAL_TOLERANCE {
                out.push(format!(
                    "{n} segments, expected {ECGID_TOTAL} ± {:.0}%",
                    ECGID_TOTAL_TOLERANCE * 100.0
                ));
            }
            let present = counts.iter().filter(|&&c| c > 0).count();
            if present != ECGID_CLASSES {
                out.push(format!("{present} persons present, expected {ECGID_CLASSES}"));
            }
        }
        Task::Apnea => {
            if relative_gap(n, APNEA_TOTAL) > APNEA_TOTAL_TOLERANCE {
                out.push(format!(
                    "{n} segments, expected {APNEA_TOTAL} ± {:.0}%",
                    APNEA_TOTAL_TOLERANCE * 100.0
                ));
            }
            let target = APNEA_POSITIVES as f64 / APNEA_TOTAL as f64;
            let frac = if n == 0 { 0.0 } else { counts[1] as f64 / n as f64 };
            if (frac - target).abs() > APNEA_FRACTION_TOLERANCE {
                out.push(format!(
                    "apnea fraction {:.2}%, expected {:.2}% ± {:.0} points",
                    frac * 100.0,
                    target * 100.0,
                    APNEA_FRACTION_TOLERANCE * 100.0
                ));
            }
        }
    }
    out
}
