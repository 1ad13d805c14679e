use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The three classification problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Five-class AAMI arrhythmia classification.
    Mitbih,
    /// 90-person identity recognition.
    Ecgid,
    /// Per-minute apnea detection.
    Apnea,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Mitbih, Task::Ecgid, Task::Apnea];

    pub fn name(self) -> &'static str {
        match self {
            Task::Mitbih => "mitbih",
            Task::Ecgid => "ecgid",
            Task::Apnea => "apnea",
        }
    }

    pub fn segment_len(self) -> usize {
        match self {
            Task::Mitbih => 257,
            Task::Ecgid => 250,
            Task::Apnea => 6000,
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            Task::Mitbih => 5,
            Task::Ecgid => 90,
            Task::Apnea => 2,
        }
    }

    pub fn default_folds(self) -> usize {
        match self {
            Task::Ecgid => 4,
            Task::Mitbih | Task::Apnea => 10,
        }
    }

    pub fn default_batch_size(self) -> usize {
        match self {
            Task::Mitbih => 995,
            Task::Ecgid => 921,
            Task::Apnea => 797,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Task::Mitbih => ["N", "S", "V", "F", "Q"].map(String::from).to_vec(),
            Task::Ecgid => (1..=90).map(|i| format!("Person_{i:02}")).collect(),
            Task::Apnea => vec!["normal".into(), "apnea".into()],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mitbih" | "mit-bih" => Ok(Task::Mitbih),
            "ecgid" | "ecg-id" => Ok(Task::Ecgid),
            "apnea" | "apnea-ecg" => Ok(Task::Apnea),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}
