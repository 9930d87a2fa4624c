//! Flooding sum-product on the Tanner graph of `H`.

use super::{DecodeOutcome, Decoder};
use crate::channel::RngStream;
use crate::codes::ParityCheckMatrix;
use crate::error::{check_len, Error, Result};

/// Messages and channel LLRs are clamped to `±LLR_CLAMP`.
pub const LLR_CLAMP: f64 = 30.0;

#[inline]
fn clamp(v: f64) -> f64 {
    v.clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// Extrinsic check-to-variable messages for one check: output `k` is
/// `2 atanh(prod_{j != k} tanh(in_j / 2))`.
pub fn check_node_update(incoming: &[f64]) -> Vec<f64> {
    let t: Vec<f64> = incoming.iter().map(|&l| (l / 2.0).tanh()).collect();
    let mut out = vec![0.0; t.len()];
    let mut prefix = 1.0;
    for k in 0..t.len() {
        out[k] = prefix;
        prefix *= t[k];
    }
    let mut suffix = 1.0;
    for k in (0..t.len()).rev() {
        let p = (out[k] * suffix).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
        out[k] = clamp(2.0 * p.atanh());
        suffix *= t[k];
    }
    out
}

#[derive(Debug, Clone)]
pub struct BpDecoder {
    pub h: ParityCheckMatrix,
    pub max_iters: usize,
}

impl BpDecoder {
    pub fn new(h: ParityCheckMatrix, max_iters: usize) -> Result<Self> {
        if max_iters == 0 {
            return Err(Error::InvalidConfig("BP needs max_iters >= 1".into()));
        }
        Ok(Self { h, max_iters })
    }
}

impl Decoder for BpDecoder {
    fn id(&self) -> String {
        format!("bp{}", self.max_iters)
    }

    fn decode(&self, y: &[f64], sigma: f64, _rng: &mut RngStream) -> Result<DecodeOutcome> {
        decode_bp(y, &self.h, sigma, self.max_iters)
    }
}

fn decide(llr: &[f64]) -> Vec<u8> {
    llr.iter().map(|&l| u8::from(l < 0.0)).collect()
}

pub fn decode_bp(y: &[f64], h: &ParityCheckMatrix, sigma: f64, max_iters: usize) -> Result<DecodeOutcome> {
    check_len("received signal", h.n(), y.len())?;
    if max_iters == 0 {
        return Err(Error::InvalidConfig("BP needs max_iters >= 1".into()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma {sigma} must be positive")));
    }
    let channel: Vec<f64> = y.iter().map(|&v| clamp(2.0 * v / (sigma * sigma))).collect();
    let mut bits = decide(&channel);
    if h.is_codeword(&bits) {
        return Ok(DecodeOutcome::new(bits, 0, h));
    }

    let supports = h.row_supports();
    // Edge messages laid out check by check.
    let mut v2c: Vec<Vec<f64>> = supports
        .iter()
        .map(|s| s.iter().map(|&i| channel[i]).collect())
        .collect();
    let mut c2v: Vec<Vec<f64>> = supports.iter().map(|s| vec![0.0; s.len()]).collect();
    let mut posterior = channel.clone();

    for iter in 1..=max_iters {
        for (j, msgs) in v2c.iter().enumerate() {
            c2v[j] = check_node_update(msgs);
        }
        posterior.copy_from_slice(&channel);
        for (j, s) in supports.iter().enumerate() {
            for (e, &i) in s.iter().enumerate() {
                posterior[i] += c2v[j][e];
            }
        }
        bits = decide(&posterior);
        if h.is_codeword(&bits) {
            return Ok(DecodeOutcome::new(bits, iter, h));
        }
        for (j, s) in supports.iter().enumerate() {
            for (e, &i) in s.iter().enumerate() {
                v2c[j][e] = clamp(posterior[i] - c2v[j][e]);
            }
        }
    }
    Ok(DecodeOutcome::new(bits, max_iters, h))
}
