//! Brute-force maximum-likelihood decoding over all codewords.

use super::{DecodeOutcome, Decoder};
use crate::channel::RngStream;
use crate::codes::GeneratorMatrix;
use crate::error::{check_len, Error, Result};

/// Largest dimension the exhaustive search accepts.
pub const ML_MAX_K: usize = 16;

/// Codeword table in bipolar form.
#[derive(Debug, Clone)]
pub struct MlDecoder {
    n: usize,
    bits: Vec<Vec<u8>>,
    bipolar: Vec<Vec<f64>>,
}

impl MlDecoder {
    pub fn new(g: &GeneratorMatrix) -> Result<Self> {
        if g.k() > ML_MAX_K {
            return Err(Error::InvalidConfig(format!(
                "exhaustive ML needs k <= {ML_MAX_K}, got {}",
                g.k()
            )));
        }
        let bits: Vec<Vec<u8>> = (0..1u64 << g.k()).map(|i| g.encode_index(i).bits).collect();
        let bipolar = bits
            .iter()
            .map(|c| c.iter().map(|&b| 1.0 - 2.0 * f64::from(b)).collect())
            .collect();
        Ok(Self {
            n: g.n(),
            bits,
            bipolar,
        })
    }

    /// Index of the nearest codeword and its squared distance. Ties go to
    /// the smallest index.
    pub fn search(&self, y: &[f64]) -> Result<(usize, f64)> {
        check_len("received signal", self.n, y.len())?;
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.bipolar.iter().enumerate() {
            let d: f64 = y.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }

    pub fn codeword(&self, index: usize) -> &[u8] {
        &self.bits[index]
    }
}

impl Decoder for MlDecoder {
    fn id(&self) -> String {
        "ml".into()
    }

    fn decode(&self, y: &[f64], _sigma: f64, _rng: &mut RngStream) -> Result<DecodeOutcome> {
        let (i, _) = self.search(y)?;
        Ok(DecodeOutcome {
            bits: self.bits[i].clone(),
            steps_used: 1,
            converged: true,
            per_step_trace: None,
        })
    }
}

/// One-shot form that builds the codeword table per call.
pub fn decode_ml_exhaustive(y: &[f64], g: &GeneratorMatrix) -> Result<DecodeOutcome> {
    MlDecoder::new(g)?.decode(y, 1.0, &mut RngStream::new(0, 0))
}
