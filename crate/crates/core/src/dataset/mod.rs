//! Task-specific segmentation, the segment cache, and stratified folds.

mod cache;
mod corpus;
mod folds;
mod segment;
mod task;

pub use cache::{SegmentSet, CACHE_MAGIC, CACHE_VERSION};
pub use corpus::{
    missing_inputs, prepare, prepare_apnea, prepare_ecgid, prepare_mitbih, Prepared, APNEA_TRAINING_RECORDS,
    ECGID_PERSONS, MITBIH_RECORDS,
};
pub use folds::{make_split, stratified_kfold, FoldPlan, SplitTriple};
pub use segment::{
    longest_loss_run, segment_apnea, segment_ecgid, segment_mitbih, LabeledSegment, SegmentSource, APNEA_MAX_LOSS_RUN,
    APNEA_MINUTE, ECGID_AFTER, ECGID_BEFORE, ECGID_CYCLES_KEPT, MITBIH_HALF_WINDOW,
};
pub use task::Task;
