//! Reverse-mode differentiation over dense `f64` tensors, with the layer
//! vocabulary of the ECG networks, Adam, and parameter checkpoints.

mod adam;
pub mod gradcheck;
mod params;
mod tape;
mod value;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use params::{
    derive_seed, he_uniform, read_checkpoint, Init, ParamId, ParamStore, Parameter, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use tape::{activate, gelu, sigmoid, ActivationKind, Gradients, Padding, Tape, Var, PROBABILITY_FLOOR};
pub use value::Tensor;
