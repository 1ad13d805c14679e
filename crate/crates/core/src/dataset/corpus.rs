//! Loading whole PhysioNet databases from a directory tree.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::wfdb::{AamiTally, Record};

use super::{segment_apnea, segment_ecgid, segment_mitbih, SegmentSet, Task};

/// The 48 MIT-BIH Arrhythmia Database records.
pub const MITBIH_RECORDS: [&str; 48] = [
    "100", "101", "102", "103", "104", "105", "106", "107", "108", "109", "111", "112", "113", "114", "115", "116",
    "117", "118", "119", "121", "122", "123", "124", "200", "201", "202", "203", "205", "207", "208", "209", "210",
    "212", "213", "214", "215", "217", "219", "220", "221", "222", "223", "228", "230", "231", "232", "233", "234",
];

/// The 35 Apnea-ECG training-set recordings.
pub const APNEA_TRAINING_RECORDS: [&str; 35] = [
    "a01", "a02", "a03", "a04", "a05", "a06", "a07", "a08", "a09", "a10", "a11", "a12", "a13", "a14", "a15", "a16",
    "a17", "a18", "a19", "a20", "b01", "b02", "b03", "b04", "b05", "c01", "c02", "c03", "c04", "c05", "c06", "c07",
    "c08", "c09", "c10",
];

pub const ECGID_PERSONS: usize = 90;

/// Segments plus a human-readable ingestion report.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub set: SegmentSet,
    pub report: String,
    /// AAMI diagnostics (MIT-BIH only).
    pub tally: Option<AamiTally>,
}

/// ECG-ID recordings as `(person index, directory, record name)`.
fn ecgid_recordings(dir: &Path) -> Result<Vec<(usize, PathBuf, String)>> {
    let mut out = Vec::new();
    for person in 1..=ECGID_PERSONS {
        let pdir = dir.join(format!("Person_{person:02}"));
        let Ok(entries) = std::fs::read_dir(&pdir) else {
            continue;
        };
        let mut recs: Vec<(u32, String)> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let stem = name.strip_suffix(".hea")?;
                let num: u32 = stem.strip_prefix("rec_")?.parse().ok()?;
                Some((num, stem.to_string()))
            })
            .collect();
        recs.sort();
        out.extend(recs.into_iter().map(|(_, stem)| (person - 1, pdir.clone(), stem)));
    }
    Ok(out)
}

/// Record files the task expects but the directory lacks.
pub fn missing_inputs(task: Task, dir: &Path) -> Vec<String> {
    let check = |names: &[&str], exts: &[&str]| -> Vec<String> {
        names
            .iter()
            .flat_map(|n| exts.iter().map(move |e| format!("{n}.{e}")))
            .filter(|f| !dir.join(f).is_file())
            .collect()
    };
    match task {
        Task::Mitbih => check(&MITBIH_RECORDS, &["hea", "dat", "atr"]),
        Task::Apnea => check(&APNEA_TRAINING_RECORDS, &["hea", "dat", "apn"]),
        Task::Ecgid => (1..=ECGID_PERSONS)
            .map(|p| format!("Person_{p:02}"))
            .filter(|p| {
                let d = dir.join(p);
                !d.join("rec_1.hea").is_file()
            })
            .collect(),
    }
}

fn require_inputs(task: Task, dir: &Path) -> Result<()> {
    let missing = missing_inputs(task, dir);
    if missing.is_empty() {
        return Ok(());
    }
    let shown: Vec<&str> = missing.iter().take(12).map(String::as_str).collect();
    Err(Error::InvalidInput(format!(
        "{} expected {task} inputs missing under {}: {}{}",
        missing.len(),
        dir.display(),
        shown.join(", "),
        if missing.len() > shown.len() { ", ..." } else { "" }
    )))
}

pub fn prepare_mitbih(dir: &Path) -> Result<Prepared> {
    require_inputs(Task::Mitbih, dir)?;
    let mut segments = Vec::new();
    let mut tally = AamiTally::default();
    for name in MITBIH_RECORDS {
        let rec = Record::load(dir, name, Some("atr"))?;
        let (segs, t) = segment_mitbih(&rec);
        segments.extend(segs);
        tally.merge(&t);
    }
    let set = SegmentSet::new(Task::Mitbih, segments);
    let report = format!("{}{}", class_report(&set), tally.report());
    Ok(Prepared {
        set,
        report,
        tally: Some(tally),
    })
}

pub fn prepare_ecgid(dir: &Path) -> Result<Prepared> {
    require_inputs(Task::Ecgid, dir)?;
    let mut segments = Vec::new();
    let mut notes = String::new();
    let recordings = ecgid_recordings(dir)?;
    for (person, pdir, name) in &recordings {
        let mut rec = Record::load(pdir, name, None)?;
        rec.header.record_name = format!("Person_{:02}/{name}", person + 1);
        let segs = segment_ecgid(&rec, *person);
        if segs.len() < super::segment::ECGID_CYCLES_KEPT {
            let _ = writeln!(notes, "{}: {} cycles", rec.header.record_name, segs.len());
        }
        segments.extend(segs);
    }
    let set = SegmentSet::new(Task::Ecgid, segments);
    let present = set.class_counts().iter().filter(|&&c| c > 0).count();
    let mut report = class_report(&set);
    let _ = writeln!(report, "recordings\t{}", recordings.len());
    let _ = writeln!(report, "classes present\t{present}");
    if !notes.is_empty() {
        let _ = write!(report, "recordings with fewer than 8 cycles:\n{notes}");
    }
    Ok(Prepared {
        set,
        report,
        tally: None,
    })
}

pub fn prepare_apnea(dir: &Path) -> Result<Prepared> {
    require_inputs(Task::Apnea, dir)?;
    let mut segments = Vec::new();
    let mut notes = String::new();
    for name in APNEA_TRAINING_RECORDS {
        let rec = Record::load(dir, name, Some("apn"))?;
        let minutes = rec
            .annotations
            .iter()
            .filter(|a| matches!(a.symbol_char(), 'A' | 'N'))
            .count();
        let segs = segment_apnea(&rec);
        if segs.len() < minutes {
            let _ = writeln!(notes, "{name}: kept {} of {minutes} annotated minutes", segs.len());
        }
        if segs.is_empty() {
            warn!("{name}: no usable minutes");
        }
        segments.extend(segs);
    }
    let set = SegmentSet::new(Task::Apnea, segments);
    let mut report = class_report(&set);
    if !notes.is_empty() {
        let _ = write!(report, "{notes}");
    }
    Ok(Prepared {
        set,
        report,
        tally: None,
    })
}

pub fn prepare(task: Task, dir: &Path) -> Result<Prepared> {
    match task {
        Task::Mitbih => prepare_mitbih(dir),
        Task::Ecgid => prepare_ecgid(dir),
        Task::Apnea => prepare_apnea(dir),
    }
}

fn class_report(set: &SegmentSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "task\t{}", set.task);
    let _ = writeln!(s, "segments\t{}", set.segments.len());
    for (name, count) in set.class_names.iter().zip(set.class_counts()) {
        let _ = writeln!(s, "class {name}\t{count}");
    }
    s
}
