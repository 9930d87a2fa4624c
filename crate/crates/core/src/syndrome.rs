//! Hard syndrome-error counts and the differentiable soft syndrome.
//!
//! Per check `j`, the soft syndrome is the mean-field probability that the
//! check is violated:
//!
//! ```text
//! s_j = 1/2 - 1/2 * prod_{i in row j} (2 * sigmoid(2 x_i / sigma^2) - 1)
//! ```
//!
//! and the condition is `e_soft = -(1/m) * sum_j ln(1 - s_j)`. Note that
//! `2 * sigmoid(2a) - 1 == tanh(a)`, which is what is evaluated.

use crate::channel::hard_bit;
use crate::codes::ParityCheckMatrix;
use crate::error::{check_len, Error, Result};

/// Floor applied to `1 - s_j` before taking logs.
pub const SATISFACTION_FLOOR: f64 = 1e-12;

/// Number of unsatisfied checks of the hard decision of `y`.
pub fn syndrome_error_sum(y: &[f64], h: &ParityCheckMatrix) -> Result<usize> {
    check_len("received signal", h.n(), y.len())?;
    if y.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in received signal".into()));
    }
    Ok(hard_error_sum(y, h))
}

pub(crate) fn hard_error_sum(y: &[f64], h: &ParityCheckMatrix) -> usize {
    h.row_supports()
        .iter()
        .filter(|support| support.iter().fold(0u8, |acc, &i| acc ^ hard_bit(y[i])) == 1)
        .count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftSyndrome {
    pub values: Vec<f64>,
    pub sigma_used: f64,
}

impl SoftSyndrome {
    /// `-(1/m) * sum_j ln(1 - s_j)`; errors if any check is fully violated.
    pub fn condition(&self) -> Result<f64> {
        let m = self.values.len() as f64;
        let mut acc = 0.0;
        for (j, &s) in self.values.iter().enumerate() {
            let q = 1.0 - s;
            if q <= 0.0 {
                return Err(Error::Saturated { check: j });
            }
            acc -= q.ln();
        }
        Ok(acc / m)
    }

    /// Like [`condition`](Self::condition) with `1 - s_j` floored at
    /// [`SATISFACTION_FLOOR`].
    pub fn condition_clamped(&self) -> f64 {
        let m = self.values.len() as f64;
        -self
            .values
            .iter()
            .map(|&s| (1.0 - s).max(SATISFACTION_FLOOR).ln())
            .sum::<f64>()
            / m
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("sigma {sigma} must be positive")))
    }
}

/// Per-check soft syndrome of a bipolar-valued signal.
pub fn soft_syndrome(x: &[f64], h: &ParityCheckMatrix, sigma: f64) -> Result<SoftSyndrome> {
    check_len("signal", h.n(), x.len())?;
    check_sigma(sigma)?;
    let inv_var = 1.0 / (sigma * sigma);
    let values = h
        .row_supports()
        .iter()
        .map(|support| {
            let prod: f64 = support.iter().map(|&i| (x[i] * inv_var).tanh()).product();
            0.5 - 0.5 * prod
        })
        .collect();
    Ok(SoftSyndrome {
        values,
        sigma_used: sigma,
    })
}

/// The soft-syndrome time condition `e_soft`. Errors on exact saturation.
pub fn soft_syndrome_condition(x: &[f64], h: &ParityCheckMatrix, sigma: f64) -> Result<f64> {
    soft_syndrome(x, h, sigma)?.condition()
}

/// Clamped `e_soft`, used wherever a finite condition is always required.
pub fn soft_condition_clamped(x: &[f64], h: &ParityCheckMatrix, sigma: f64) -> Result<f64> {
    Ok(soft_syndrome(x, h, sigma)?.condition_clamped())
}

/// The soft-syndrome regularizer (`+e_soft`, clamped) on a bipolar signal.
pub fn soft_syndrome_loss(x: &[f64], h: &ParityCheckMatrix, sigma: f64) -> Result<f64> {
    soft_condition_clamped(x, h, sigma)
}

/// Regularizer and its gradient with respect to the bipolar input.
pub fn soft_syndrome_loss_with_grad(
    x: &[f64],
    h: &ParityCheckMatrix,
    sigma: f64,
) -> Result<(f64, Vec<f64>)> {
    check_len("signal", h.n(), x.len())?;
    check_sigma(sigma)?;
    let mut grad = vec![0.0; x.len()];
    let loss = soft_loss_grad_into(x, h, sigma, 1.0, &mut grad);
    Ok((loss, grad))
}

/// Maps bit probabilities `p = P(bit = 1)` to bipolar expectations `1 - 2p`.
pub fn probs_to_bipolar(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&p| 1.0 - 2.0 * p).collect()
}

/// Regularizer evaluated on bit probabilities through `1 - 2p`.
pub fn soft_syndrome_loss_on_probs(p: &[f64], h: &ParityCheckMatrix, sigma: f64) -> Result<f64> {
    soft_syndrome_loss(&probs_to_bipolar(p), h, sigma)
}

/// Computes the clamped regularizer on bipolar `x` and accumulates
/// `scale * d(loss)/dx` into `grad`. Inputs are assumed validated.
pub(crate) fn soft_loss_grad_into(
    x: &[f64],
    h: &ParityCheckMatrix,
    sigma: f64,
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let inv_var = 1.0 / (sigma * sigma);
    let m = h.m() as f64;
    let mut loss = 0.0;
    let mut u = Vec::new();
    let mut prefix = Vec::new();
    for support in h.row_supports() {
        u.clear();
        u.extend(support.iter().map(|&i| (x[i] * inv_var).tanh()));
        // prefix[k] = prod u[..k]
        prefix.clear();
        prefix.push(1.0);
        for &v in &u {
            let last = *prefix.last().unwrap();
            prefix.push(last * v);
        }
        let prod = prefix[u.len()];
        let q = 0.5 + 0.5 * prod;
        if q <= SATISFACTION_FLOOR {
            loss -= SATISFACTION_FLOOR.ln();
            continue;
        }
        loss -= q.ln();
        let mut suffix = 1.0;
        for k in (0..u.len()).rev() {
            let others = prefix[k] * suffix;
            // d(-ln q)/du_k = -0.5 * others / q ; du/dx = (1 - u^2) / sigma^2
            let d = -0.5 * others / q * (1.0 - u[k] * u[k]) * inv_var;
            grad[support[k]] += scale * d / m;
            suffix *= u[k];
        }
    }
    loss / m
}
