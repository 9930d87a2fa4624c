//! Condition embedding: fixed sinusoidal features of the scalar condition
//! followed by a learned two-layer map.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::ops::{silu, silu_grad};
use super::params::{Init, Layout, Slot};
use crate::error::{Error, Result};

const MIN_FREQ: f64 = 0.25;
const MAX_FREQ: f64 = 16.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct EmbedSlots {
    pub w1: Slot,
    pub b1: Slot,
    pub w2: Slot,
    pub b2: Slot,
    pub dim: usize,
}

impl EmbedSlots {
    pub fn register(layout: &mut Layout, dim: usize) -> Self {
        Self {
            w1: layout.add("embed.w1", dim, dim, Init::FanIn(dim)),
            b1: layout.add("embed.b1", 1, dim, Init::Zero),
            w2: layout.add("embed.w2", dim, dim, Init::FanIn(dim)),
            b2: layout.add("embed.b2", 1, dim, Init::Zero),
            dim,
        }
    }
}

fn frequencies(dim: usize) -> Vec<f64> {
    let half = dim / 2;
    if half <= 1 {
        return vec![1.0; half];
    }
    let ratio = (MAX_FREQ / MIN_FREQ).ln() / (half - 1) as f64;
    (0..half).map(|k| MIN_FREQ * (ratio * k as f64).exp()).collect()
}

/// Sinusoidal features `[sin(w_k e), cos(w_k e)]...` (plus `e` itself when
/// `dim` is odd) and their derivatives with respect to `e`.
pub(crate) fn features(e: f64, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut f = Vec::with_capacity(dim);
    let mut df = Vec::with_capacity(dim);
    for w in frequencies(dim) {
        let (s, c) = (w * e).sin_cos();
        f.push(s);
        df.push(w * c);
        f.push(c);
        df.push(-w * s);
    }
    if dim % 2 == 1 {
        f.push(e);
        df.push(1.0);
    }
    (f, df)
}

pub(crate) struct EmbedCache {
    phi: Array2<f64>,
    dphi: Array2<f64>,
    z1: Array2<f64>,
    a1: Array2<f64>,
}

/// Embeds a batch of conditions, returning `B x dim`.
pub(crate) fn forward(
    slots: &EmbedSlots,
    values: &[f64],
    conditions: ArrayView1<f64>,
) -> (Array2<f64>, EmbedCache) {
    let b = conditions.len();
    let dim = slots.dim;
    let mut phi = Array2::zeros((b, dim));
    let mut dphi = Array2::zeros((b, dim));
    for (r, &e) in conditions.iter().enumerate() {
        let (f, df) = features(e, dim);
        phi.row_mut(r).assign(&ArrayView1::from(&f));
        dphi.row_mut(r).assign(&ArrayView1::from(&df));
    }
    let z1 = phi.dot(&slots.w1.view(values)) + &slots.b1.view(values);
    let a1 = z1.mapv(silu);
    let out = a1.dot(&slots.w2.view(values)) + &slots.b2.view(values);
    (out, EmbedCache { phi, dphi, z1, a1 })
}

/// Accumulates parameter gradients and returns `d/d(condition)`.
pub(crate) fn backward(
    slots: &EmbedSlots,
    values: &[f64],
    cache: &EmbedCache,
    d_out: ArrayView2<f64>,
    grad: &mut [f64],
) -> Array1<f64> {
    slots.w2.view_mut(grad).scaled_add(1.0, &cache.a1.t().dot(&d_out));
    slots
        .b2
        .view_mut(grad)
        .scaled_add(1.0, &d_out.sum_axis(Axis(0)).insert_axis(Axis(0)));
    let da1 = d_out.dot(&slots.w2.view(values).t());
    let dz1 = da1 * cache.z1.mapv(silu_grad);
    slots.w1.view_mut(grad).scaled_add(1.0, &cache.phi.t().dot(&dz1));
    slots
        .b1
        .view_mut(grad)
        .scaled_add(1.0, &dz1.sum_axis(Axis(0)).insert_axis(Axis(0)));
    let dphi = dz1.dot(&slots.w1.view(values).t());
    (dphi * &cache.dphi).sum_axis(Axis(1))
}

/// Embeds a single nonnegative condition.
pub fn embed_condition(
    params: &super::ModelParams,
    e: f64,
) -> Result<Vec<f64>> {
    if !(e >= 0.0) || !e.is_finite() {
        return Err(Error::InvalidInput(format!("condition {e} must be finite and >= 0")));
    }
    let slots = params.config.embed_slots();
    let (out, _) = forward(&slots, &params.values, ArrayView1::from(&[e]));
    Ok(out.row(0).to_vec())
}
