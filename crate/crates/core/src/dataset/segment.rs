use log::warn;

use crate::dsp::{mean_subtract, pan_tompkins_rpeaks, savitzky_golay, zscore};
use crate::wfdb::{map_beat_to_aami, AamiTally, Record};

use super::Task;

/// Where a segment came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSource {
    pub record: String,
    /// Index of the first sample of the window within the record.
    pub position: usize,
}

/// A fixed-length single-channel window with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    /// Channel-major `channels × length`; every task uses one channel.
    pub samples: Vec<f64>,
    pub channels: usize,
    pub label: usize,
    pub source: SegmentSource,
    pub task: Task,
}

impl LabeledSegment {
    pub fn len(&self) -> usize {
        self.samples.len() / self.channels.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub const MITBIH_HALF_WINDOW: usize = 128;
pub const ECGID_BEFORE: usize = 80;
pub const ECGID_AFTER: usize = 170;
pub const ECGID_CYCLES_KEPT: usize = 8;
pub const APNEA_MINUTE: usize = 6000;
/// Longest tolerated signal-loss run (0.5 s at 100 Hz).
pub const APNEA_MAX_LOSS_RUN: usize = 50;

/// Beat-centered 257-sample windows from channel 0, labelled by AAMI class.
/// Returns the segments and a tally with per-class counts and skipped symbols.
pub fn segment_mitbih(record: &Record) -> (Vec<LabeledSegment>, AamiTally) {
    let signal = &record.signals[0];
    let n = signal.len();
    let mut tally = AamiTally::default();
    let mut out = Vec::new();
    for ann in &record.annotations {
        let symbol = ann.symbol_char();
        let Some(class) = map_beat_to_aami(symbol) else {
            tally.record(symbol);
            continue;
        };
        let r = ann.sample_index as usize;
        if r < MITBIH_HALF_WINDOW || r + MITBIH_HALF_WINDOW >= n {
            tally.excluded_at_edges += 1;
            continue;
        }
        tally.record(symbol);
        let start = r - MITBIH_HALF_WINDOW;
        out.push(LabeledSegment {
            samples: signal[start..=r + MITBIH_HALF_WINDOW].to_vec(),
            channels: 1,
            label: class.index(),
            source: SegmentSource {
                record: record.header.record_name.clone(),
                position: start,
            },
            task: Task::Mitbih,
        });
    }
    (out, tally)
}

/// Cardiac cycles (80 samples before, peak, 169 after) from channel 0: the
/// eight closest to the recording's average cycle, each mean-subtracted.
pub fn segment_ecgid(record: &Record, label: usize) -> Vec<LabeledSegment> {
    let signal = &record.signals[0];
    let len = ECGID_BEFORE + ECGID_AFTER;
    let peaks = pan_tompkins_rpeaks(signal, record.header.sampling_frequency);
    let cycles: Vec<(usize, &[f64])> = peaks
        .into_iter()
        .filter(|&p| p >= ECGID_BEFORE && p - ECGID_BEFORE + len <= signal.len())
        .map(|p| (p - ECGID_BEFORE, &signal[p - ECGID_BEFORE..p - ECGID_BEFORE + len]))
        .collect();
    if cycles.is_empty() {
        warn!("{}: no complete cardiac cycles detected, record skipped", record.header.record_name);
        return Vec::new();
    }

    let mut average = vec![0.0; len];
    for (_, c) in &cycles {
        for (a, v) in average.iter_mut().zip(c.iter()) {
            *a += v;
        }
    }
    for a in &mut average {
        *a /= cycles.len() as f64;
    }
    let mut ranked: Vec<(f64, usize)> = cycles
        .iter()
        .enumerate()
        .map(|(i, (_, c))| {
            let d: f64 = c.iter().zip(&average).map(|(x, m)| (x - m).powi(2)).sum();
            (d.sqrt(), i)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut kept: Vec<usize> = ranked.iter().take(ECGID_CYCLES_KEPT).map(|r| r.1).collect();
    kept.sort_unstable();

    kept.into_iter()
        .map(|i| {
            let (start, c) = cycles[i];
            LabeledSegment {
                samples: mean_subtract(c),
                channels: 1,
                label,
                source: SegmentSource {
                    record: record.header.record_name.clone(),
                    position: start,
                },
                task: Task::Ecgid,
            }
        })
        .collect()
}

/// Length of the longest run of signal loss: consecutive identical adc
/// values, or consecutive samples pinned at the adc range limits.
pub fn longest_loss_run(adc: &[i32], range: (i32, i32)) -> usize {
    let mut best = 0;
    let mut same = 0;
    let mut saturated = 0;
    for (i, &v) in adc.iter().enumerate() {
        same = if i > 0 && adc[i - 1] == v { same + 1 } else { 1 };
        saturated = if v <= range.0 || v >= range.1 { saturated + 1 } else { 0 };
        best = best.max(same).max(saturated);
    }
    best
}

/// One-minute windows aligned to the per-minute apnea annotations, with
/// lossy minutes dropped, then Savitzky-Golay(5, 3) smoothing and z-scoring.
/// Label 1 is apnea ('A'), 0 normal ('N').
pub fn segment_apnea(record: &Record) -> Vec<LabeledSegment> {
    let signal = &record.signals[0];
    let adc = &record.adc[0];
    let range = record.header.signals[0].format.adc_range();
    let mut out = Vec::new();
    for ann in &record.annotations {
        let label = match ann.symbol_char() {
            'A' => 1,
            'N' => 0,
            _ => continue,
        };
        let start = ann.sample_index as usize;
        let end = start + APNEA_MINUTE;
        if end > signal.len() {
            continue;
        }
        if longest_loss_run(&adc[start..end], range) > APNEA_MAX_LOSS_RUN {
            continue;
        }
        let smoothed = match savitzky_golay(&signal[start..end], 5, 3) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let Ok(samples) = zscore(&smoothed) else {
            continue;
        };
        out.push(LabeledSegment {
            samples,
            channels: 1,
            label,
            source: SegmentSource {
                record: record.header.record_name.clone(),
                position: start,
            },
            task: Task::Apnea,
        });
    }
    out
}
