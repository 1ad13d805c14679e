use std::collections::BTreeMap;
use std::fmt::Write as _;

/// The five AAMI EC57 heartbeat classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AamiClass {
    /// Normal and bundle-branch beats.
    N,
    /// Supraventricular ectopic.
    S,
    /// Ventricular ectopic.
    V,
    /// Fusion of ventricular and normal.
    F,
    /// Paced, fusion-of-paced, and unclassifiable.
    Q,
}

impl AamiClass {
    pub const ALL: [AamiClass; 5] = [Self::N, Self::S, Self::V, Self::F, Self::Q];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::N => "N",
            Self::S => "S",
            Self::V => "V",
            Self::F => "F",
            Self::Q => "Q",
        }
    }
}

/// Maps a beat mnemonic to its AAMI class; non-beat and unmapped
/// mnemonics give `None`.
pub fn map_beat_to_aami(symbol: char) -> Option<AamiClass> {
    match symbol {
        'N' | 'L' | 'R' | 'e' | 'j' => Some(AamiClass::N),
        'A' | 'a' | 'J' | 'S' => Some(AamiClass::S),
        'V' | 'E' => Some(AamiClass::V),
        'F' => Some(AamiClass::F),
        '/' | 'f' | 'Q' => Some(AamiClass::Q),
        _ => None,
    }
}

/// Running AAMI class counts plus the symbols that were left out.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AamiTally {
    pub counts: [usize; 5],
    pub skipped: BTreeMap<char, usize>,
    /// Mapped beats left out because their window overruns the record.
    pub excluded_at_edges: usize,
}

impl AamiTally {
    pub fn record(&mut self, symbol: char) -> Option<AamiClass> {
        let class = map_beat_to_aami(symbol);
        match class {
            Some(c) => self.counts[c.index()] += 1,
            None => *self.skipped.entry(symbol).or_default() += 1,
        }
        class
    }

    pub fn merge(&mut self, other: &AamiTally) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (k, v) in &other.skipped {
            *self.skipped.entry(*k).or_default() += v;
        }
        self.excluded_at_edges += other.excluded_at_edges;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Plain-text diagnostics listing class counts and skipped symbols.
    pub fn report(&self) -> String {
        let mut s = String::new();
        for c in AamiClass::ALL {
            let _ = writeln!(s, "{}\t{}", c.name(), self.counts[c.index()]);
        }
        let _ = writeln!(s, "total\t{}", self.total());
        if self.excluded_at_edges > 0 {
            let _ = writeln!(s, "beats too close to a record edge\t{}", self.excluded_at_edges);
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(s, "skipped symbols:");
            for (sym, n) in &self.skipped {
                let _ = writeln!(s, "  {sym:?}\t{n}");
            }
        }
        s
    }
}
