use crate::error::{Error, Result};

const SKIP: u8 = 59;
const NUM: u8 = 60;
const SUB: u8 = 61;
const CHN: u8 = 62;
const AUX: u8 = 63;

/// Mnemonics of the MIT annotation codes 0..=41. Unassigned codes have none.
const MNEMONICS: [Option<char>; 42] = [
    None,       // 0 NOTQRS
    Some('N'),  // 1 NORMAL
    Some('L'),  // 2 LBBB
    Some('R'),  // 3 RBBB
    Some('a'),  // 4 ABERR
    Some('V'),  // 5 PVC
    Some('F'),  // 6 FUSION
    Some('J'),  // 7 NPC
    Some('A'),  // 8 APC
    Some('S'),  // 9 SVPB
    Some('E'),  // 10 VESC
    Some('j'),  // 11 NESC
    Some('/'),  // 12 PACE
    Some('Q'),  // 13 UNKNOWN
    Some('~'),  // 14 NOISE
    None,       // 15
    Some('|'),  // 16 ARFCT
    None,       // 17
    Some('s'),  // 18 STCH
    Some('T'),  // 19 TCH
    Some('*'),  // 20 SYSTOLE
    Some('D'),  // 21 DIASTOLE
    Some('"'),  // 22 NOTE
    Some('='),  // 23 MEASURE
    Some('p'),  // 24 PWAVE
    Some('B'),  // 25 BBB
    Some('^'),  // 26 PACESP
    Some('t'),  // 27 TWAVE
    Some('+'),  // 28 RHYTHM
    Some('u'),  // 29 UWAVE
    Some('?'),  // 30 LEARN
    Some('!'),  // 31 FLWAV
    Some('['),  // 32 VFON
    Some(']'),  // 33 VFOFF
    Some('e'),  // 34 AESC
    Some('n'),  // 35 SVESC
    Some('@'),  // 36 LINK
    Some('x'),  // 37 NAPC
    Some('f'),  // 38 PFUS
    Some('('),  // 39 WFON
    Some(')'),  // 40 WFOFF
    Some('r'),  // 41 RONT
];

/// Printable mnemonic for an annotation code, if the code is assigned.
pub fn code_to_symbol(code: u8) -> Option<char> {
    MNEMONICS.get(usize::from(code)).copied().flatten()
}

/// Annotation code for a mnemonic.
pub fn symbol_to_code(symbol: char) -> Option<u8> {
    MNEMONICS
        .iter()
        .position(|m| *m == Some(symbol))
        .map(|p| p as u8)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    /// Absolute sample position.
    pub sample_index: u64,
    pub symbol_code: u8,
    pub subtype: i8,
    pub channel: u8,
    pub num: i8,
    pub aux_text: Option<String>,
}

impl Annotation {
    pub fn new(sample_index: u64, symbol_code: u8) -> Self {
        Self {
            sample_index,
            symbol_code,
            subtype: 0,
            channel: 0,
            num: 0,
            aux_text: None,
        }
    }

    /// Mnemonic character; unassigned codes render as a space.
    pub fn symbol_char(&self) -> char {
        code_to_symbol(self.symbol_code).unwrap_or(' ')
    }
}

fn read_word(bytes: &[u8], pos: usize) -> Option<u16> {
    bytes.get(pos..pos + 2).map(|b| u16::from_le_bytes([b[0], b[1]]))
}

/// Decodes an MIT-format annotation file (`.atr`, `.apn`, ...).
pub fn parse_annotations(bytes: &[u8]) -> Result<Vec<Annotation>> {
    if !bytes.len().is_multiple_of(2) {
        return Err(Error::Annotation(format!("odd byte length {}", bytes.len())));
    }
    let mut out: Vec<Annotation> = Vec::new();
    let mut time: i64 = 0;
    let mut pos = 0usize;
    loop {
        let word = read_word(bytes, pos)
            .ok_or_else(|| Error::Annotation("stream ends without the 0x0000 terminator".into()))?;
        pos += 2;
        let code = (word >> 10) as u8;
        let field = i64::from(word & 0x03FF);
        match code {
            0 if field == 0 => break,
            0 => {
                return Err(Error::Annotation(format!(
                    "code 0 with nonzero field {field} at byte {}",
                    pos - 2
                )))
            }
            SKIP => {
                let hi = read_word(bytes, pos);
                let lo = read_word(bytes, pos + 2);
                let (Some(hi), Some(lo)) = (hi, lo) else {
                    return Err(Error::Annotation("SKIP interval overruns buffer".into()));
                };
                pos += 4;
                time += i64::from(((u32::from(hi) << 16) | u32::from(lo)) as i32);
            }
            NUM | SUB | CHN => {
                let last = out
                    .last_mut()
                    .ok_or_else(|| Error::Annotation(format!("modifier code {code} before any annotation")))?;
                match code {
                    NUM => last.num = field as i8,
                    SUB => last.subtype = field as i8,
                    _ => last.channel = field as u8,
                }
            }
            AUX => {
                let len = field as usize;
                let text = bytes
                    .get(pos..pos + len)
                    .ok_or_else(|| Error::Annotation(format!("AUX length {len} overruns buffer at byte {pos}")))?;
                pos += len + (len & 1);
                let last = out
                    .last_mut()
                    .ok_or_else(|| Error::Annotation("AUX before any annotation".into()))?;
                let text = text.split(|&b| b == 0).next().unwrap_or_default();
                last.aux_text = Some(String::from_utf8_lossy(text).into_owned());
            }
            _ => {
                time += field;
                if time < 0 {
                    return Err(Error::Annotation(format!("negative sample index {time}")));
                }
                if let Some(prev) = out.last() {
                    if (time as u64) < prev.sample_index {
                        return Err(Error::Annotation(format!(
                            "sample index decreases from {} to {time}",
                            prev.sample_index
                        )));
                    }
                }
                out.push(Annotation::new(time as u64, code));
            }
        }
    }
    Ok(out)
}

/// Encodes annotations (sorted by sample index) into the MIT codec,
/// including the terminator. Used to build fixtures.
pub fn encode_annotations(annotations: &[Annotation]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<u8>, code: u8, field: u16| {
        out.extend_from_slice(&((u16::from(code) << 10) | (field & 0x03FF)).to_le_bytes());
    };
    let mut time = 0u64;
    for a in annotations {
        if !(1..SKIP).contains(&a.symbol_code) {
            return Err(Error::InvalidInput(format!("cannot store code {}", a.symbol_code)));
        }
        let delta = a
            .sample_index
            .checked_sub(time)
            .ok_or_else(|| Error::InvalidInput("annotations not sorted".into()))?;
        if delta > 1023 {
            let skip = u32::try_from(delta).map_err(|_| Error::InvalidInput("gap too large".into()))?;
            push(&mut out, SKIP, 0);
            out.extend_from_slice(&((skip >> 16) as u16).to_le_bytes());
            out.extend_from_slice(&((skip & 0xFFFF) as u16).to_le_bytes());
            push(&mut out, a.symbol_code, 0);
        } else {
            push(&mut out, a.symbol_code, delta as u16);
        }
        time = a.sample_index;
        if a.subtype != 0 {
            push(&mut out, SUB, a.subtype as u8 as u16);
        }
        if a.channel != 0 {
            push(&mut out, CHN, u16::from(a.channel));
        }
        if a.num != 0 {
            push(&mut out, NUM, a.num as u8 as u16);
        }
        if let Some(aux) = &a.aux_text {
            let b = aux.as_bytes();
            if b.len() > 255 {
                return Err(Error::InvalidInput("aux text longer than 255 bytes".into()));
            }
            push(&mut out, AUX, b.len() as u16);
            out.extend_from_slice(b);
            if b.len() % 2 == 1 {
                out.push(0);
            }
        }
    }
    out.extend_from_slice(&[0, 0]);
    Ok(out)
}
