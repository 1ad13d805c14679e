//! PhysioNet WFDB records: `.hea` headers, format 212/16/61 signal files and
//! MIT-codec annotation files, plus the AAMI beat-class grouping.

mod aami;
mod annotation;
mod header;
mod signal;

use std::path::Path;

pub use aami::{map_beat_to_aami, AamiClass, AamiTally};
pub use annotation::{code_to_symbol, encode_annotations, parse_annotations, symbol_to_code, Annotation};
pub use header::{parse_header, RecordHeader, SignalSpec, StorageFormat, DEFAULT_GAIN};
pub use signal::{decode_signal, decode_signal_group, encode_signal, encoded_len};

use crate::error::{Error, Result};

/// A decoded recording.
#[derive(Debug, Clone)]
pub struct Record {
    pub header: RecordHeader,
    /// Raw adc values per channel.
    pub adc: Vec<Vec<i32>>,
    /// Physical values in mV per channel: `(adc - baseline) / gain`.
    pub signals: Vec<Vec<f64>>,
    pub annotations: Vec<Annotation>,
}

impl Record {
    /// Assembles a record from decoded adc channels, converting to physical units.
    pub fn from_adc(header: RecordHeader, adc: Vec<Vec<i32>>, annotations: Vec<Annotation>) -> Result<Self> {
        if adc.len() != header.n_signals {
            return Err(Error::InvalidInput(format!(
                "{} channels supplied for {} declared signals",
                adc.len(),
                header.n_signals
            )));
        }
        if let Some(bad) = adc.iter().position(|c| c.len() != header.n_samples) {
            return Err(Error::InvalidInput(format!(
                "channel {bad} has {} samples, header declares {}",
                adc[bad].len(),
                header.n_samples
            )));
        }
        let signals = adc
            .iter()
            .zip(&header.signals)
            .map(|(ch, spec)| {
                ch.iter()
                    .map(|&v| f64::from(v - spec.baseline) / spec.adc_gain)
                    .collect()
            })
            .collect();
        Ok(Self {
            header,
            adc,
            signals,
            annotations,
        })
    }

    /// Decodes a record from in-memory file contents. `read_file` resolves
    /// signal file names named by the header.
    pub fn decode(
        header: RecordHeader,
        mut read_file: impl FnMut(&str) -> Result<Vec<u8>>,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        let mut adc = vec![Vec::new(); header.n_signals];
        let mut done = vec![false; header.n_signals];
        for i in 0..header.n_signals {
            if done[i] {
                continue;
            }
            let spec = &header.signals[i];
            let group: Vec<usize> = (i..header.n_signals)
                .filter(|&j| header.signals[j].filename == spec.filename)
                .collect();
            let bytes = read_file(&spec.filename)?;
            let decoded = decode_signal_group(&header, &group, &bytes)?;
            for (j, ch) in group.into_iter().zip(decoded) {
                adc[j] = ch;
                done[j] = true;
            }
        }
        Self::from_adc(header, adc, annotations)
    }

    /// Loads `<dir>/<name>.hea`, its signal files, and `<dir>/<name>.<annotator>`
    /// when an annotator extension is given.
    pub fn load(dir: &Path, name: &str, annotator: Option<&str>) -> Result<Self> {
        let hea_path = dir.join(format!("{name}.hea"));
        let header = parse_header(&read(&hea_path)?)?;
        let annotations = match annotator {
            Some(ext) => parse_annotations(&read(&dir.join(format!("{name}.{ext}")))?)?,
            None => Vec::new(),
        };
        Self::decode(header, |file| read(&dir.join(file)), annotations)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}
