//! Per-bit check of the bound `|p - q|^2 <= BCE(p, x0) + BCE(q, x0)`, which
//! ties the two-prediction consistency objective to the squared total
//! variation between the two predictions.

use super::losses::bce_bit;
use crate::channel::RngStream;

/// Indicator per bit of whether the bound holds.
pub fn prop1_check(probs_p: &[f64], probs_q: &[f64], x0_bits: &[u8]) -> Vec<bool> {
    probs_p
        .iter()
        .zip(probs_q)
        .zip(x0_bits)
        .map(|((&p, &q), &x)| bound_holds(p, q, x))
        .collect()
}

#[inline]
pub fn bound_holds(p: f64, q: f64, x0: u8) -> bool {
    (p - q).powi(2) <= bce_bit(p, x0) + bce_bit(q, x0)
}

/// Counts violations over `trials` uniform random `(p, q, x0)` triples.
pub fn prop1_monte_carlo(trials: u64, seed: u64) -> u64 {
    let mut rng = RngStream::new(seed, 0x9e37);
    let mut violations = 0;
    for _ in 0..trials {
        let p = rng.uniform();
        let q = rng.uniform();
        let x = rng.bit();
        if !bound_holds(p, q, x) {
            violations += 1;
        }
    }
    violations
}
