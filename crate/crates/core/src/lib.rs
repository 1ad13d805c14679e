pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fanlayers;
pub mod models;
pub mod tensor;
pub mod wfdb;

pub use error::{Error, Result};
