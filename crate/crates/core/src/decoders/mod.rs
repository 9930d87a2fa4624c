//! Inference procedures behind one [`Decoder`] trait: the neural one-step,
//! multi-step and iterative-denoising decoders plus sum-product BP, an
//! exhaustive ML oracle and uncoded hard decision.

mod bp;
mod ml;
mod neural;

pub use bp::{check_node_update, decode_bp, BpDecoder, LLR_CLAMP};
pub use ml::{decode_ml_exhaustive, MlDecoder, ML_MAX_K};
pub use neural::{
    ddecc_coefficient, decode_ddecc, decode_ddecc_batch, decode_multi_step, decode_one_step,
    decode_one_step_batch, BitModel, DdeccDecoder, MultiStepDecoder, NeuralModel, OneStepDecoder,
};

use crate::channel::{hard_bit, RngStream};
use crate::codes::ParityCheckMatrix;
use crate::error::Result;
use crate::syndrome::hard_error_sum;

/// One point of a decoding trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub e_hard: usize,
    pub e_soft: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    pub steps_used: usize,
    /// Hard syndrome of `bits` is zero.
    pub converged: bool,
    pub per_step_trace: Option<Vec<TracePoint>>,
}

impl DecodeOutcome {
    pub(crate) fn new(bits: Vec<u8>, steps_used: usize, h: &ParityCheckMatrix) -> Self {
        let converged = h.is_codeword(&bits);
        Self {
            bits,
            steps_used,
            converged,
            per_step_trace: None,
        }
    }
}

/// A decoder for one fixed code.
pub trait Decoder: Send + Sync {
    fn id(&self) -> String;

    /// Decodes one received word given the receiver-known noise std.
    /// `rng` is only drawn from by randomized decoders.
    fn decode(&self, y: &[f64], sigma: f64, rng: &mut RngStream) -> Result<DecodeOutcome>;

    /// Decodes several words; `rngs[i]` belongs to `ys[i]`.
    fn decode_batch(
        &self,
        ys: &[Vec<f64>],
        sigma: f64,
        rngs: &mut [RngStream],
    ) -> Result<Vec<DecodeOutcome>> {
        ys.iter()
            .zip(rngs.iter_mut())
            .map(|(y, rng)| self.decode(y, sigma, rng))
            .collect()
    }
}

/// Per-bit hard decision with no decoding.
#[derive(Debug, Clone)]
pub struct UncodedDecoder {
    pub h: ParityCheckMatrix,
}

impl Decoder for UncodedDecoder {
    fn id(&self) -> String {
        "uncoded".into()
    }

    fn decode(&self, y: &[f64], _sigma: f64, _rng: &mut RngStream) -> Result<DecodeOutcome> {
        crate::error::check_len("received signal", self.h.n(), y.len())?;
        let bits = y.iter().map(|&v| hard_bit(v)).collect();
        Ok(DecodeOutcome::new(bits, 0, &self.h))
    }
}

/// `e_hard` of a real-valued word.
pub(crate) fn e_hard(x: &[f64], h: &ParityCheckMatrix) -> usize {
    hard_error_sum(x, h)
}
