//! One-step consistency-flow decoding of binary linear block codes.

pub mod channel;
pub mod codes;
pub mod decoders;
pub mod diffusion;
pub mod backbone;
pub mod error;
pub mod harness;
pub mod syndrome;
pub mod trainer;

pub use error::{Error, Result};
