//! Synthetic WFDB databases laid out like the PhysioNet downloads.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use cfan_core::dataset::{APNEA_TRAINING_RECORDS, ECGID_PERSONS, MITBIH_RECORDS};
use cfan_core::wfdb::{encode_annotations, encode_signal, symbol_to_code, Annotation, StorageFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GAIN: f64 = 200.0;

fn bump(t: f64, c: f64, w: f64, a: f64) -> f64 {
    a * (-((t - c) / w).powi(2) / 2.0).exp()
}

/// P-QRS-T beat train in mV; `shape` scales the waves so records differ.
pub fn ecg(fs: f64, n: usize, period: f64, shape: [f64; 3], rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let ph = t % period;
            bump(ph, 0.2 * period, 0.02, 0.15 * shape[0]) + bump(ph, 0.35 * period, 0.008, 1.2 * shape[1])
                - bump(ph, 0.35 * period + 0.02, 0.006, 0.25)
                + bump(ph, 0.6 * period, 0.04, 0.3 * shape[2])
                + 0.05 * (2.0 * PI * 0.3 * t).sin()
                + rng.random_range(-0.01..0.01)
        })
        .collect()
}

fn to_adc(mv: &[f64]) -> Vec<i32> {
    mv.iter().map(|v| (v * GAIN).round() as i32).collect()
}

/// Writes `<name>.hea` and `<name>.dat` (one signal file for all channels).
pub fn write_record(dir: &Path, name: &str, fs: f64, format: u32, channels: &[Vec<i32>]) {
    std::fs::create_dir_all(dir).unwrap();
    let n = channels[0].len();
    let mut hea = format!("{name} {} {fs} {n}\n", channels.len());
    for (i, ch) in channels.iter().enumerate() {
        hea.push_str(&format!("{name}.dat {format} {GAIN} 12 0 {} 0 0 ECG{i}\n", ch[0]));
    }
    std::fs::write(dir.join(format!("{name}.hea")), hea).unwrap();
    let fmt = StorageFormat::from_code(format).unwrap();
    std::fs::write(dir.join(format!("{name}.dat")), encode_signal(fmt, channels).unwrap()).unwrap();
}

pub fn write_annotations(dir: &Path, name: &str, ext: &str, anns: &[(u64, char)]) {
    let anns: Vec<Annotation> = anns
        .iter()
        .map(|&(i, c)| Annotation::new(i, symbol_to_code(c).unwrap()))
        .collect();
    std::fs::write(dir.join(format!("{name}.{ext}")), encode_annotations(&anns).unwrap()).unwrap();
}

/// Beat symbols cycled through per record, one per AAMI class plus a rhythm marker.
const MIT_SYMBOLS: [char; 6] = ['N', 'A', 'V', 'F', '/', '+'];

/// 48 records of 10 s at 360 Hz with a beat every 0.8 s. Returns the
/// expected per-class counts of beat windows that fit in the record.
pub fn write_mitbih(dir: &Path) -> [usize; 5] {
    let fs = 360.0;
    let n = 3600;
    let mut counts = [0; 5];
    for (r, name) in MITBIH_RECORDS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(r as u64);
        let x = ecg(fs, n, 0.8, [1.0, 1.0, 1.0], &mut rng);
        let adc = to_adc(&x);
        write_record(dir, name, fs, 212, &[adc.clone(), adc]);
        let mut anns = Vec::new();
        for (b, peak) in (0..).map(|b| (b, (b as f64 * 0.8 + 0.28) * fs)).take_while(|(_, p)| *p < n as f64) {
            let peak = peak as u64;
            let sym = MIT_SYMBOLS[(r + b) % MIT_SYMBOLS.len()];
            anns.push((peak, sym));
            let class = match sym {
                'N' => Some(0),
                'A' => Some(1),
                'V' => Some(2),
                'F' => Some(3),
                '/' => Some(4),
                _ => None,
            };
            if let Some(c) = class {
                if peak >= 128 && (peak as usize) + 128 < n {
                    counts[c] += 1;
                }
            }
        }
        write_annotations(dir, name, "atr", &anns);
    }
    counts
}

/// Person-specific wave amplitudes, so identities are learnable.
pub fn person_shape(p: usize) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + p as u64);
    [rng.random_range(0.5..2.0), rng.random_range(0.6..1.4), rng.random_range(0.3..2.5)]
}

/// One 20 s, 500 Hz, two-channel recording per person under `Person_NN/`.
pub fn write_ecgid(dir: &Path) {
    let fs = 500.0;
    for p in 0..ECGID_PERSONS {
        let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
        let period = 60.0 / rng.random_range(60.0..85.0);
        let x = to_adc(&ecg(fs, 10_000, period, person_shape(p), &mut rng));
        write_record(&dir.join(format!("Person_{:02}", p + 1)), "rec_1", fs, 16, &[x.clone(), x]);
    }
}

/// 35 records of three annotated minutes at 100 Hz. Apnea minutes beat
/// slower with weaker R waves. Record `a01` has a flat final minute.
/// Returns the expected (normal, apnea) counts.
pub fn write_apnea(dir: &Path) -> [usize; 2] {
    let fs = 100.0;
    let minute = 6000;
    let mut counts = [0; 2];
    for (r, name) in APNEA_TRAINING_RECORDS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + r as u64);
        let mut x = Vec::new();
        let mut anns = Vec::new();
        for m in 0..3 {
            let apnea = (r + m) % 3 == 0;
            let seg = if apnea {
                ecg(fs, minute, 1.3, [1.0, 0.6, 1.0], &mut rng)
            } else {
                ecg(fs, minute, 0.75, [1.0, 1.2, 1.0], &mut rng)
            };
            let flat = r == 0 && m == 2;
            x.extend(if flat { vec![0.0; minute] } else { seg });
            anns.push(((m * minute) as u64, if apnea { 'A' } else { 'N' }));
            if !flat {
                counts[usize::from(apnea)] += 1;
            }
        }
        write_record(dir, name, fs, 16, &[to_adc(&x)]);
        write_annotations(dir, name, "apn", &anns);
    }
    counts
}
