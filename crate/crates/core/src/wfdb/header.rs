use std::str::FromStr;

use crate::error::{Error, Result};

/// On-disk sample encodings understood by the signal decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageFormat {
    /// Two 12-bit two's-complement samples packed into three bytes.
    Packed212,
    /// 16-bit two's-complement, little-endian.
    Le16,
    /// 16-bit two's-complement, big-endian.
    Be16,
}

impl StorageFormat {
    pub fn from_code(code: u32) -> Result<Self> {
        match code {
            212 => Ok(Self::Packed212),
            16 => Ok(Self::Le16),
            61 => Ok(Self::Be16),
            other => Err(Error::UnsupportedFormat(other)),
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Self::Packed212 => 212,
            Self::Le16 => 16,
            Self::Be16 => 61,
        }
    }

    /// Smallest and largest representable adc value.
    pub fn adc_range(self) -> (i32, i32) {
        match self {
            Self::Packed212 => (-2048, 2047),
            Self::Le16 | Self::Be16 => (-32768, 32767),
        }
    }
}

/// One signal line of a header.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub filename: String,
    pub format: StorageFormat,
    /// Bytes to skip at the start of the signal file.
    pub byte_offset: usize,
    /// adc units per physical unit (mV for the ECG databases).
    pub adc_gain: f64,
    pub baseline: i32,
    pub units: String,
    pub adc_resolution: Option<u32>,
    pub adc_zero: Option<i32>,
    pub initial_value: Option<i32>,
    pub checksum: Option<i32>,
    pub description: String,
}

/// A parsed single-segment `.hea` file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_frequency: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
    /// Comment lines (without the leading `#`), in file order.
    pub comments: Vec<String>,
}

pub const DEFAULT_GAIN: f64 = 200.0;

fn header_err(line: usize, message: impl Into<String>) -> Error {
    Error::Header {
        line,
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, field: &str, token: &str) -> Result<T> {
    token
        .parse::<T>()
        .map_err(|_| header_err(line, format!("{field} is not numeric: {token:?}")))
}

/// Parses the text of a `.hea` file.
pub fn parse_header(bytes: &[u8]) -> Result<RecordHeader> {
    let text = std::str::from_utf8(bytes).map_err(|e| header_err(0, format!("not utf-8: {e}")))?;

    let mut comments = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            comments.push(comment.trim().to_string());
        } else if !trimmed.is_empty() {
            lines.push((idx + 1, trimmed));
        }
    }

    let Some(&(record_line_no, record_line)) = lines.first() else {
        return Err(header_err(1, "missing record line"));
    };
    let (record_name, n_signals, sampling_frequency, n_samples) =
        parse_record_line(record_line_no, record_line)?;

    let signal_lines = &lines[1..];
    if signal_lines.len() < n_signals {
        let line = signal_lines.last().map_or(record_line_no, |l| l.0);
        return Err(header_err(
            line,
            format!(
                "record declares {n_signals} signals but only {} signal lines follow",
                signal_lines.len()
            ),
        ));
    }
    let signals = signal_lines[..n_signals]
        .iter()
        .map(|&(no, line)| parse_signal_line(no, line))
        .collect::<Result<Vec<_>>>()?;

    Ok(RecordHeader {
        record_name,
        n_signals,
        sampling_frequency,
        n_samples,
        signals,
        comments,
    })
}

fn parse_record_line(no: usize, line: &str) -> Result<(String, usize, f64, usize)> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 4 {
        return Err(header_err(
            no,
            format!(
                "record line needs name, signal count, frequency and sample count; found {} tokens",
                tokens.len()
            ),
        ));
    }
    let name = tokens[0];
    if name.contains('/') {
        return Err(header_err(no, "multi-segment records are not supported"));
    }
    let n_signals: usize = parse_num(no, "signal count", tokens[1])?;
    if n_signals == 0 {
        return Err(header_err(no, "record declares zero signals"));
    }

    // fs[/counter_freq[(base_counter)]]
    let fs_token = tokens[2].split('/').next().unwrap_or_default();
    let fs: f64 = parse_num(no, "sampling frequency", fs_token)?;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(header_err(no, format!("sampling frequency must be positive, got {fs}")));
    }
    let n_samples: usize = parse_num(no, "sample count", tokens[3])?;
    if n_samples == 0 {
        return Err(header_err(no, "sample count must be positive"));
    }
    Ok((name.to_string(), n_signals, fs, n_samples))
}

fn parse_signal_line(no: usize, line: &str) -> Result<SignalSpec> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 2 {
        return Err(header_err(
            no,
            format!("signal line needs at least filename and format; found {} tokens", tokens.len()),
        ));
    }
    let filename = tokens[0].to_string();

    // format[xsamples_per_frame][:skew][+byte_offset]
    let fmt_token = tokens[1];
    let (fmt_part, byte_offset) = match fmt_token.split_once('+') {
        Some((f, off)) => (f, parse_num::<usize>(no, "byte offset", off)?),
        None => (fmt_token, 0),
    };
    let fmt_part = fmt_part.split(':').next().unwrap_or_default();
    let (code_part, spf) = match fmt_part.split_once('x') {
        Some((c, s)) => (c, parse_num::<u32>(no, "samples per frame", s)?),
        None => (fmt_part, 1),
    };
    if spf != 1 {
        return Err(header_err(no, "multi-frequency signals are not supported"));
    }
    let code: u32 = parse_num(no, "storage format", code_part)?;
    let format = StorageFormat::from_code(code).map_err(|_| {
        header_err(no, format!("unsupported storage format {code} (supported: 212, 16, 61)"))
    })?;

    // gain[(baseline)][/units]
    let mut adc_gain = DEFAULT_GAIN;
    let mut explicit_baseline = None;
    let mut units = String::from("mV");
    if let Some(gain_token) = tokens.get(2) {
        let (gain_part, unit_part) = match gain_token.split_once('/') {
            Some((g, u)) => (g, Some(u)),
            None => (*gain_token, None),
        };
        let (gain_str, base_str) = match gain_part.split_once('(') {
            Some((g, rest)) => {
                let b = rest
                    .strip_suffix(')')
                    .ok_or_else(|| header_err(no, format!("unterminated baseline in {gain_token:?}")))?;
                (g, Some(b))
            }
            None => (gain_part, None),
        };
        let gain: f64 = parse_num(no, "adc gain", gain_str)?;
        if gain != 0.0 {
            adc_gain = gain;
        }
        if let Some(b) = base_str {
            explicit_baseline = Some(parse_num::<i32>(no, "baseline", b)?);
        }
        if let Some(u) = unit_part {
            units = u.to_string();
        }
    }

    let adc_resolution = tokens.get(3).map(|t| parse_num(no, "adc resolution", t)).transpose()?;
    let adc_zero = tokens.get(4).map(|t| parse_num(no, "adc zero", t)).transpose()?;
    let initial_value = tokens.get(5).map(|t| parse_num(no, "initial value", t)).transpose()?;
    let checksum = tokens.get(6).map(|t| parse_num(no, "checksum", t)).transpose()?;
    let description = if tokens.len() > 8 {
        tokens[8..].join(" ")
    } else {
        String::new()
    };

    Ok(SignalSpec {
        filename,
        format,
        byte_offset,
        adc_gain,
        baseline: explicit_baseline.or(adc_zero).unwrap_or(0),
        units,
        adc_resolution,
        adc_zero,
        initial_value,
        checksum,
        description,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MITDB_100: &str = "100 2 360 650000\n\
        100.dat 212 200 11 1024 995 -22131 0 MLII\n\
        100.dat 212 200 11 1024 1011 20052 0 V5\n\
        # 69 M 1085 1629 x1\n\
        # Aldomet, Inderal\n";

    #[test]
    fn mitdb_style_header() {
        let h = parse_header(MITDB_100.as_bytes()).unwrap();
        assert_eq!(h.record_name, "100");
        assert_eq!(h.n_signals, 2);
        assert_eq!(h.sampling_frequency, 360.0);
        assert_eq!(h.n_samples, 650000);
        assert_eq!(h.signals[0].format, StorageFormat::Packed212);
        assert_eq!(h.signals[0].adc_gain, 200.0);
        assert_eq!(h.signals[0].baseline, 1024);
        assert_eq!(h.signals[0].description, "MLII");
        assert_eq!(h.signals[1].description, "V5");
        assert_eq!(h.comments.len(), 2);
    }

    #[test]
    fn minimal_header_verbatim() {
        let h = parse_header(b"rec 1 100 6000\nrec.dat 16\n").unwrap();
        assert_eq!(h.n_signals, 1);
        assert_eq!(h.sampling_frequency, 100.0);
        assert_eq!(h.n_samples, 6000);
        let s = &h.signals[0];
        assert_eq!(s.format, StorageFormat::Le16);
        assert_eq!(s.adc_gain, DEFAULT_GAIN);
        assert_eq!(s.baseline, 0);
        assert_eq!(s.filename, "rec.dat");
    }

    #[test]
    fn gain_with_baseline_and_units() {
        let h = parse_header(b"r 1 500/1000 10000\nr.dat 16+24 200.5(-3)/uV 12 0 0 0 0 ECG I filtered\n").unwrap();
        let s = &h.signals[0];
        assert_eq!(h.sampling_frequency, 500.0);
        assert_eq!(s.byte_offset, 24);
        assert_eq!(s.adc_gain, 200.5);
        assert_eq!(s.baseline, -3);
        assert_eq!(s.units, "uV");
        assert_eq!(s.description, "ECG I filtered");
    }

    #[test]
    fn zero_gain_means_default() {
        let h = parse_header(b"r 1 100 10\nr.dat 61 0\n").unwrap();
        assert_eq!(h.signals[0].adc_gain, DEFAULT_GAIN);
        assert_eq!(h.signals[0].format, StorageFormat::Be16);
    }

    #[test]
    fn non_numeric_frequency_names_line() {
        let err = parse_header(b"# comment\nrec 1 abc 100\nrec.dat 16\n").unwrap_err();
        match err {
            Error::Header { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("frequency"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsupported_format_is_an_error() {
        let err = parse_header(b"r 1 100 10\nr.dat 80 200\n").unwrap_err();
        assert!(matches!(err, Error::Header { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_signal_lines() {
        let err = parse_header(b"r 2 100 10\nr.dat 16\n").unwrap_err();
        assert!(matches!(err, Error::Header { .. }));
    }

    #[test]
    fn short_record_line() {
        assert!(parse_header(b"r 1\n").is_err());
        assert!(parse_header(b"").is_err());
        assert!(parse_header(b"r/3 1 100 10\nr.dat 16\n").is_err());
    }
}
