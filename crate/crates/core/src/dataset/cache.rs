//! Binary segment cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "CFANSEG1"
//! version      u32      = 1
//! task         u16 length + UTF-8 name ("mitbih" | "ecgid" | "apnea")
//! n_segments   u64
//! channels     u32
//! length       u32
//! n_classes    u32, then per class: u16 length + UTF-8 name
//! per segment: label u32, record name (u16 length + UTF-8), position u64
//! samples      n_segments × channels × length f32, segment-major
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{LabeledSegment, SegmentSource, Task};

pub const CACHE_MAGIC: &[u8; 8] = b"CFANSEG1";
pub const CACHE_VERSION: u32 = 1;

/// All segments of one task with shared shape and class table.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    pub task: Task,
    pub channels: usize,
    pub length: usize,
    pub class_names: Vec<String>,
    pub segments: Vec<LabeledSegment>,
}

impl SegmentSet {
    pub fn new(task: Task, segments: Vec<LabeledSegment>) -> Self {
        Self {
            task,
            channels: 1,
            length: task.segment_len(),
            class_names: task.class_names(),
            segments,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for s in &self.segments {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        put_str(&mut buf, self.task.name())?;
        buf.extend_from_slice(&(self.segments.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.channels as u32).to_le_bytes());
        buf.extend_from_slice(&(self.length as u32).to_le_bytes());
        buf.extend_from_slice(&(self.class_names.len() as u32).to_le_bytes());
        for name in &self.class_names {
            put_str(&mut buf, name)?;
        }
        for s in &self.segments {
            buf.extend_from_slice(&(s.label as u32).to_le_bytes());
            put_str(&mut buf, &s.source.record)?;
            buf.extend_from_slice(&(s.source.position as u64).to_le_bytes());
        }
        for s in &self.segments {
            if s.samples.len() != self.channels * self.length {
                return Err(Error::Shape(format!(
                    "segment from {} has {} samples, expected {}",
                    s.source.record,
                    s.samples.len(),
                    self.channels * self.length
                )));
            }
            for &v in &s.samples {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != CACHE_MAGIC {
            return Err(Error::Format("not a segment cache (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != CACHE_VERSION {
            return Err(Error::Format(format!("unsupported cache version {version}")));
        }
        let task: Task = cur.string()?.parse()?;
        let n = cur.u64()? as usize;
        let channels = cur.u32()? as usize;
        let length = cur.u32()? as usize;
        let n_classes = cur.u32()? as usize;
        let class_names = (0..n_classes).map(|_| cur.string()).collect::<Result<Vec<_>>>()?;
        let mut meta = Vec::with_capacity(n);
        for _ in 0..n {
            let label = cur.u32()? as usize;
            if label >= n_classes {
                return Err(Error::Format(format!("label {label} outside {n_classes} classes")));
            }
            let record = cur.string()?;
            let position = cur.u64()? as usize;
            meta.push((label, SegmentSource { record, position }));
        }
        let width = channels * length;
        let mut segments = Vec::with_capacity(n);
        for (label, source) in meta {
            let raw = cur.take(width * 4)?;
            let samples = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect();
            segments.push(LabeledSegment {
                samples,
                channels,
                label,
                source,
                task,
            });
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
        }
        Ok(Self {
            task,
            channels,
            length,
            class_names,
            segments,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::read_from(&mut f)
    }
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::InvalidInput("string longer than 65535 bytes".into()))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Format(format!("unexpected end of file at byte {}", self.pos)))?;
        self.pos += n;
        Ok(out)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }
}
