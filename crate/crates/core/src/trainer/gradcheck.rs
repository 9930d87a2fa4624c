//! Central finite-difference check of the analytic training gradient.

use serde::{Deserialize, Serialize};

use super::Trainer;
use crate::channel::RngStream;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub coords: usize,
    pub max_rel_error: f64,
}

/// Compares the analytic gradient against central differences at `coords`
/// random parameter indices, on the first batch of epoch 0. Relative errors
/// use a floor of `1e-7` on the denominator so near-zero entries do not blow up.
pub fn gradient_check(tr: &Trainer, coords: usize, seed: u64) -> Result<GradCheck> {
    let mut rng = tr.epoch_rng(0);
    let batch = tr.prepare_batch(&mut rng)?;
    let values = tr.state().params.values.clone();
    let (_, grad) = tr.objective_grad(&values, &batch)?;
    let mut pick = RngStream::new(seed, 0);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = values.clone();
    for _ in 0..coords {
        let idx = pick.int_inclusive(0, values.len() - 1);
        probe[idx] = values[idx] + h;
        let hi = tr.objective_grad(&probe, &batch)?.0.total;
        probe[idx] = values[idx] - h;
        let lo = tr.objective_grad(&probe, &batch)?.0.total;
        probe[idx] = values[idx];
        let fd = (hi - lo) / (2.0 * h);
        worst = worst.max((fd - grad[idx]).abs() / fd.abs().max(grad[idx].abs()).max(1e-7));
    }
    Ok(GradCheck {
        coords,
        max_rel_error: worst,
    })
}
