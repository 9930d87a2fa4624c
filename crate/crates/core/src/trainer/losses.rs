//! Training objectives on per-bit probabilities.

use crate::codes::ParityCheckMatrix;
use crate::error::{check_len, Error, Result};
use crate::syndrome::soft_syndrome_loss_on_probs;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[inline]
pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Binary cross-entropy of one bit, natural log.
#[inline]
pub fn bce_bit(p: f64, target: u8) -> f64 {
    let p = clamp_prob(p);
    if target == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Per-bit mean BCE.
pub fn bce(probs: &[f64], target: &[u8]) -> Result<f64> {
    check_len("target", probs.len(), target.len())?;
    if probs.is_empty() {
        return Err(Error::InvalidInput("empty probability vector".into()));
    }
    Ok(probs
        .iter()
        .zip(target)
        .map(|(&p, &x)| bce_bit(p, x))
        .sum::<f64>()
        / probs.len() as f64)
}

/// Hard decision of probabilities; `p > 0.5` decodes to 1.
pub fn hard_decision(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p > 0.5)).collect()
}

/// `w * [BCE(p_t, x0) + BCE(p_r, x0)]` with `w = 1`.
pub fn ec_cm_loss(probs_t: &[f64], probs_r: &[f64], x0_bits: &[u8]) -> Result<f64> {
    weighted_ec_cm_loss(probs_t, probs_r, x0_bits, 1.0)
}

pub fn weighted_ec_cm_loss(
    probs_t: &[f64],
    probs_r: &[f64],
    x0_bits: &[u8],
    weight: f64,
) -> Result<f64> {
    check_len("probs_r", probs_t.len(), probs_r.len())?;
    Ok(weight * (bce(probs_t, x0_bits)? + bce(probs_r, x0_bits)?))
}

/// Consistency loss plus the weighted soft-syndrome regularizer of both
/// predictions.
#[allow(clippy::too_many_arguments)]
pub fn total_loss(
    probs_t: &[f64],
    probs_r: &[f64],
    x0_bits: &[u8],
    h: &ParityCheckMatrix,
    sigma_t: f64,
    sigma_r: f64,
    lambda_syn: f64,
) -> Result<f64> {
    let consistency = ec_cm_loss(probs_t, probs_r, x0_bits)?;
    if lambda_syn == 0.0 {
        return Ok(consistency);
    }
    let reg = soft_syndrome_loss_on_probs(probs_t, h, sigma_t)?
        + soft_syndrome_loss_on_probs(probs_r, h, sigma_r)?;
    Ok(consistency + lambda_syn * reg)
}

/// BCE of the online prediction against the hard-decided target prediction.
/// The target is treated as a constant.
pub fn vanilla_cm_loss(probs_t: &[f64], probs_r_target: &[f64]) -> Result<f64> {
    check_len("target", probs_t.len(), probs_r_target.len())?;
    bce(probs_t, &hard_decision(probs_r_target))
}

/// BCE of predicted flip probabilities against the multiplicative-noise bits.
pub fn ddecc_loss(noise_probs: &[f64], target: &[u8]) -> Result<f64> {
    bce(noise_probs, target)
}
