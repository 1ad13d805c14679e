//! Declarative network specs for the four architectures, model
//! construction, and the training loop.

mod model;
mod spec;
mod train;

pub use model::{build_model, predict, Model};
pub use spec::{ArchOptions, Architecture, BlockKind, InputLayout, LayerSpec, ModelSpec};
pub use train::{
    accumulate_batch, evaluate, train, EarlyStopping, EpochRecord, Samples, StopDecision, TrainConfig, TrainHistory,
};
