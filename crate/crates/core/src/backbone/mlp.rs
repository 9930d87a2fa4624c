//! Residual MLP over `[|y| || syndrome || embed(condition)]`.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::embed::{self, EmbedCache, EmbedSlots};
use super::ops::{silu, silu_grad};
use super::params::{Init, Layout, Slot};
use super::{BackboneConfig, InputBatch, InputGrads};

#[derive(Debug, Clone)]
pub(crate) struct MlpSlots {
    embed: EmbedSlots,
    w_in: Slot,
    b_in: Slot,
    hidden: Vec<(Slot, Slot)>,
    w_out: Slot,
    b_out: Slot,
}

impl MlpSlots {
    pub fn register(cfg: &BackboneConfig, layout: &mut Layout) -> Self {
        let embed = EmbedSlots::register(layout, cfg.embed_dim);
        let d_in = cfg.n + cfg.m + cfg.embed_dim;
        let w = cfg.width;
        let w_in = layout.add("mlp.in.w", d_in, w, Init::FanIn(d_in));
        let b_in = layout.add("mlp.in.b", 1, w, Init::Zero);
        let hidden = (1..cfg.depth)
            .map(|l| {
                (
                    layout.add(format!("mlp.h{l}.w"), w, w, Init::FanIn(w)),
                    layout.add(format!("mlp.h{l}.b"), 1, w, Init::Zero),
                )
            })
            .collect();
        let w_out = layout.add("mlp.out.w", w, cfg.n, Init::FanIn(w));
        let b_out = layout.add("mlp.out.b", 1, cfg.n, Init::Zero);
        Self {
            embed,
            w_in,
            b_in,
            hidden,
            w_out,
            b_out,
        }
    }
}

pub(crate) struct MlpCache {
    embed: EmbedCache,
    x: Array2<f64>,
    z_in: Array2<f64>,
    /// Activations entering each hidden layer, then the final hidden state.
    hs: Vec<Array2<f64>>,
    zs: Vec<Array2<f64>>,
}

pub(crate) fn forward(
    slots: &MlpSlots,
    values: &[f64],
    batch: &InputBatch,
) -> (Array2<f64>, MlpCache) {
    let (emb, embed_cache) = embed::forward(&slots.embed, values, batch.condition.view());
    let x = concatenate(
        Axis(1),
        &[batch.magnitude.view(), batch.syndrome.view(), emb.view()],
    )
    .expect("batch widths agree");
    let z_in = x.dot(&slots.w_in.view(values)) + &slots.b_in.view(values);
    let mut h = z_in.mapv(silu);
    let mut hs = Vec::with_capacity(slots.hidden.len() + 1);
    let mut zs = Vec::with_capacity(slots.hidden.len());
    for (w, b) in &slots.hidden {
        let z = h.dot(&w.view(values)) + &b.view(values);
        let next = &h + &z.mapv(silu);
        hs.push(h);
        zs.push(z);
        h = next;
    }
    let raw = h.dot(&slots.w_out.view(values)) + &slots.b_out.view(values);
    hs.push(h);
    (
        raw,
        MlpCache {
            embed: embed_cache,
            x,
            z_in,
            hs,
            zs,
        },
    )
}

pub(crate) fn backward(
    slots: &MlpSlots,
    values: &[f64],
    cache: &MlpCache,
    d_raw: ArrayView2<f64>,
    grad: &mut [f64],
) -> InputGrads {
    let last = cache.hs.last().expect("at least one hidden state");
    slots.w_out.view_mut(grad).scaled_add(1.0, &last.t().dot(&d_raw));
    slots
        .b_out
        .view_mut(grad)
        .scaled_add(1.0, &d_raw.sum_axis(Axis(0)).insert_axis(Axis(0)));
    let mut dh = d_raw.dot(&slots.w_out.view(values).t());

    for (l, (w, b)) in slots.hidden.iter().enumerate().rev() {
        let dz = &dh * &cache.zs[l].mapv(silu_grad);
        w.view_mut(grad).scaled_add(1.0, &cache.hs[l].t().dot(&dz));
        b.view_mut(grad)
            .scaled_add(1.0, &dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
        dh = dh + dz.dot(&w.view(values).t());
    }

    let dz_in = dh * cache.z_in.mapv(silu_grad);
    slots.w_in.view_mut(grad).scaled_add(1.0, &cache.x.t().dot(&dz_in));
    slots
        .b_in
        .view_mut(grad)
        .scaled_add(1.0, &dz_in.sum_axis(Axis(0)).insert_axis(Axis(0)));
    let dx = dz_in.dot(&slots.w_in.view(values).t());

    let n = slots.w_out.cols;
    let m = slots.w_in.rows - n - slots.embed.dim;
    let d_emb = dx.slice(s![.., n + m..]);
    let condition = embed::backward(&slots.embed, values, &cache.embed, d_emb, grad);
    InputGrads {
        magnitude: dx.slice(s![.., ..n]).to_owned(),
        condition,
    }
}
