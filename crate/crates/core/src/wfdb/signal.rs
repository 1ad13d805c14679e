use crate::error::{Error, Result};

use super::header::{RecordHeader, StorageFormat};

/// Bytes needed to hold `total` interleaved samples.
pub fn encoded_len(format: StorageFormat, total: usize) -> usize {
    match format {
        StorageFormat::Packed212 => (3 * total).div_ceil(2),
        StorageFormat::Le16 | StorageFormat::Be16 => 2 * total,
    }
}

fn sign_extend_12(raw: u16) -> i32 {
    let v = i32::from(raw & 0x0FFF);
    if v & 0x800 != 0 {
        v - 0x1000
    } else {
        v
    }
}

/// Decodes `total` interleaved samples from a buffer that is already long enough.
fn decode_interleaved(format: StorageFormat, bytes: &[u8], total: usize) -> Vec<i32> {
    let mut out = Vec::with_capacity(total);
    match format {
        StorageFormat::Packed212 => {
            for chunk in bytes.chunks(3) {
                if out.len() < total {
                    let lo = u16::from(chunk[0]) | (u16::from(chunk[1] & 0x0F) << 8);
                    out.push(sign_extend_12(lo));
                }
                if out.len() < total && chunk.len() == 3 {
                    let hi = u16::from(chunk[2]) | (u16::from(chunk[1] & 0xF0) << 4);
                    out.push(sign_extend_12(hi));
                }
                if out.len() == total {
                    break;
                }
            }
        }
        StorageFormat::Le16 => {
            out.extend(
                bytes
                    .chunks_exact(2)
                    .take(total)
                    .map(|c| i32::from(i16::from_le_bytes([c[0], c[1]]))),
            );
        }
        StorageFormat::Be16 => {
            out.extend(
                bytes
                    .chunks_exact(2)
                    .take(total)
                    .map(|c| i32::from(i16::from_be_bytes([c[0], c[1]]))),
            );
        }
    }
    out
}

/// Decodes the signals listed in `indices`, which must all live in the same
/// file in that interleaving order. Returns one adc sequence per index.
pub fn decode_signal_group(header: &RecordHeader, indices: &[usize], dat_bytes: &[u8]) -> Result<Vec<Vec<i32>>> {
    let first = *indices
        .first()
        .ok_or_else(|| Error::InvalidInput("empty signal group".into()))?;
    let spec0 = header
        .signals
        .get(first)
        .ok_or_else(|| Error::InvalidInput(format!("signal index {first} out of range")))?;
    for &i in indices {
        let s = header
            .signals
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("signal index {i} out of range")))?;
        if s.filename != spec0.filename || s.format != spec0.format {
            return Err(Error::InvalidInput(format!(
                "signals {first} and {i} do not share a file and format"
            )));
        }
    }

    let width = indices.len();
    let total = header.n_samples * width;
    let expected = spec0.byte_offset + encoded_len(spec0.format, total);
    if dat_bytes.len() < expected {
        return Err(Error::TruncatedSignal {
            expected,
            actual: dat_bytes.len(),
        });
    }
    let flat = decode_interleaved(spec0.format, &dat_bytes[spec0.byte_offset..], total);

    let mut channels = vec![Vec::with_capacity(header.n_samples); width];
    for frame in flat.chunks_exact(width) {
        for (ch, &v) in channels.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    Ok(channels)
}

/// Decodes every signal of a header whose signals all share one `.dat` file.
pub fn decode_signal(header: &RecordHeader, dat_bytes: &[u8]) -> Result<Vec<Vec<i32>>> {
    let indices: Vec<usize> = (0..header.n_signals).collect();
    decode_signal_group(header, &indices, dat_bytes)
}

/// Packs per-channel adc values into the interleaved on-disk layout.
///
/// Values outside the format's range are an error.
pub fn encode_signal(format: StorageFormat, channels: &[Vec<i32>]) -> Result<Vec<u8>> {
    let n = channels.first().map_or(0, Vec::len);
    if channels.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("channels differ in length".into()));
    }
    let (lo, hi) = format.adc_range();
    let mut flat = Vec::with_capacity(n * channels.len());
    for t in 0..n {
        for ch in channels {
            let v = ch[t];
            if v < lo || v > hi {
                return Err(Error::InvalidInput(format!(
                    "sample {v} not representable in format {}",
                    format.code()
                )));
            }
            flat.push(v);
        }
    }

    let mut out = Vec::with_capacity(encoded_len(format, flat.len()));
    match format {
        StorageFormat::Packed212 => {
            for pair in flat.chunks(2) {
                let a = (pair[0] & 0x0FFF) as u16;
                out.push((a & 0xFF) as u8);
                match pair.get(1) {
                    Some(&b) => {
                        let b = (b & 0x0FFF) as u16;
                        out.push((((b >> 8) << 4) | (a >> 8)) as u8);
                        out.push((b & 0xFF) as u8);
                    }
                    None => out.push((a >> 8) as u8),
                }
            }
        }
        StorageFormat::Le16 => {
            for v in flat {
                out.extend_from_slice(&(v as i16).to_le_bytes());
            }
        }
        StorageFormat::Be16 => {
            for v in flat {
                out.extend_from_slice(&(v as i16).to_be_bytes());
            }
        }
    }
    Ok(out)
}
