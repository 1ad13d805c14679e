//! Batch driver: corpus preparation, cross-validation studies and reports.

pub mod checksum;
pub mod cli;
pub mod config;
pub mod crossval;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod prepare;
pub mod report;
pub mod svg;
pub mod targets;

pub use config::{FileConfig, ModelOverrides, StudyConfig, TrainOverrides};
pub use crossval::{cmd_crossval, CrossvalOutcome, FoldResult, RunOptions, StudyRecord};
pub use error::{CliError, Result};
pub use manifest::{FoldEntry, FoldStatus, Manifest};
pub use prepare::{cmd_prepare, PrepareOptions, PrepareOutcome};
pub use report::{cmd_report, Report};
