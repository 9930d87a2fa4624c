//! A tiny cross-attention stack: one token per bit (magnitude) attends to one
//! token per check (syndrome). Syndrome tokens are not updated between layers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::embed::{self, EmbedCache, EmbedSlots};
use super::ops::{silu, silu_grad};
use super::params::{Init, Layout, Slot};
use super::{BackboneConfig, InputBatch, InputGrads};

#[derive(Debug, Clone)]
struct LayerSlots {
    wq: Slot,
    wk: Slot,
    wv: Slot,
    wo: Slot,
    w1: Slot,
    b1: Slot,
    w2: Slot,
    b2: Slot,
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionSlots {
    embed: EmbedSlots,
    cond_w: Slot,
    cond_b: Slot,
    mag_w: Slot,
    mag_pos: Slot,
    syn_w: Slot,
    syn_pos: Slot,
    layers: Vec<LayerSlots>,
    out_w: Slot,
    out_b: Slot,
    width: usize,
}

impl AttentionSlots {
    pub fn register(cfg: &BackboneConfig, layout: &mut Layout) -> Self {
        let d = cfg.width;
        let embed = EmbedSlots::register(layout, cfg.embed_dim);
        let cond_w = layout.add("xattn.cond.w", cfg.embed_dim, d, Init::FanIn(cfg.embed_dim));
        let cond_b = layout.add("xattn.cond.b", 1, d, Init::Zero);
        let mag_w = layout.add("xattn.mag.w", 1, d, Init::FanIn(1));
        let mag_pos = layout.add("xattn.mag.pos", cfg.n, d, Init::FanIn(d));
        let syn_w = layout.add("xattn.syn.w", 1, d, Init::FanIn(1));
        let syn_pos = layout.add("xattn.syn.pos", cfg.m, d, Init::FanIn(d));
        let layers = (0..cfg.depth)
            .map(|l| LayerSlots {
                wq: layout.add(format!("xattn.l{l}.wq"), d, d, Init::FanIn(d)),
                wk: layout.add(format!("xattn.l{l}.wk"), d, d, Init::FanIn(d)),
                wv: layout.add(format!("xattn.l{l}.wv"), d, d, Init::FanIn(d)),
                wo: layout.add(format!("xattn.l{l}.wo"), d, d, Init::FanIn(d)),
                w1: layout.add(format!("xattn.l{l}.ff1.w"), d, d, Init::FanIn(d)),
                b1: layout.add(format!("xattn.l{l}.ff1.b"), 1, d, Init::Zero),
                w2: layout.add(format!("xattn.l{l}.ff2.w"), d, d, Init::FanIn(d)),
                b2: layout.add(format!("xattn.l{l}.ff2.b"), 1, d, Init::Zero),
            })
            .collect();
        let out_w = layout.add("xattn.out.w", d, 1, Init::FanIn(d));
        let out_b = layout.add("xattn.out.b", 1, 1, Init::Zero);
        Self {
            embed,
            cond_w,
            cond_b,
            mag_w,
            mag_pos,
            syn_w,
            syn_pos,
            layers,
            out_w,
            out_b,
            width: d,
        }
    }
}

struct LayerCache {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    o: Array2<f64>,
    x_mid: Array2<f64>,
    z: Array2<f64>,
    act: Array2<f64>,
}

struct SampleCache {
    syn_tokens: Array2<f64>,
    layers: Vec<LayerCache>,
    x_out: Array2<f64>,
}

pub(crate) struct AttentionCache {
    embed: EmbedCache,
    emb: Array2<f64>,
    samples: Vec<SampleCache>,
}

fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// `tokens[i] = scalars[i] * w + pos[i] + c`.
fn tokens(
    scalars: ArrayView1<f64>,
    w: ArrayView2<f64>,
    pos: ArrayView2<f64>,
    c: ArrayView1<f64>,
) -> Array2<f64> {
    let mut t = pos.to_owned();
    for (mut row, &v) in t.rows_mut().into_iter().zip(scalars) {
        row.scaled_add(v, &w.row(0));
        row += &c;
    }
    t
}

pub(crate) fn forward(
    slots: &AttentionSlots,
    values: &[f64],
    batch: &InputBatch,
) -> (Array2<f64>, AttentionCache) {
    let (emb, embed_cache) = embed::forward(&slots.embed, values, batch.condition.view());
    let cond = emb.dot(&slots.cond_w.view(values)) + &slots.cond_b.view(values);
    let scale = 1.0 / (slots.width as f64).sqrt();
    let b = batch.len();
    let n = slots.mag_pos.rows;
    let mut raw = Array2::zeros((b, n));
    let mut samples = Vec::with_capacity(b);

    for r in 0..b {
        let c = cond.row(r);
        let syn_tokens = tokens(
            batch.syndrome.row(r),
            slots.syn_w.view(values),
            slots.syn_pos.view(values),
            c,
        );
        let mut x = tokens(
            batch.magnitude.row(r),
            slots.mag_w.view(values),
            slots.mag_pos.view(values),
            c,
        );
        let mut layers = Vec::with_capacity(slots.layers.len());
        for l in &slots.layers {
            let q = x.dot(&l.wq.view(values));
            let k = syn_tokens.dot(&l.wk.view(values));
            let v = syn_tokens.dot(&l.wv.view(values));
            let mut attn = q.dot(&k.t()) * scale;
            softmax_rows(&mut attn);
            let o = attn.dot(&v);
            let x_mid = &x + &o.dot(&l.wo.view(values));
            let z = x_mid.dot(&l.w1.view(values)) + &l.b1.view(values);
            let act = z.mapv(silu);
            let x_next = &x_mid + &act.dot(&l.w2.view(values)) + &l.b2.view(values);
            layers.push(LayerCache {
                x_in: x,
                q,
                k,
                v,
                attn,
                o,
                x_mid,
                z,
                act,
            });
            x = x_next;
        }
        let out = x.dot(&slots.out_w.view(values)).column(0).to_owned() + values[slots.out_b.offset];
        raw.row_mut(r).assign(&out);
        samples.push(SampleCache {
            syn_tokens,
            layers,
            x_out: x,
        });
    }
    (
        raw,
        AttentionCache {
            embed: embed_cache,
            emb,
            samples,
        },
    )
}

fn acc(slot: &Slot, grad: &mut [f64], delta: &Array2<f64>) {
    slot.view_mut(grad).scaled_add(1.0, delta);
}

fn row_sum(a: &Array2<f64>) -> Array2<f64> {
    a.sum_axis(Axis(0)).insert_axis(Axis(0))
}

pub(crate) fn backward(
    slots: &AttentionSlots,
    values: &[f64],
    cache: &AttentionCache,
    batch: &InputBatch,
    d_raw: ArrayView2<f64>,
    grad: &mut [f64],
) -> InputGrads {
    let scale = 1.0 / (slots.width as f64).sqrt();
    let b = batch.len();
    let n = slots.mag_pos.rows;
    let d = slots.width;
    let out_w = slots.out_w.view(values);
    let mut d_cond = Array2::zeros((b, d));
    let mut d_mag = Array2::zeros((b, n));

    for (r, sample) in cache.samples.iter().enumerate() {
        let g = d_raw.row(r).to_owned().insert_axis(Axis(1)); // n x 1
        acc(&slots.out_w, grad, &sample.x_out.t().dot(&g));
        grad[slots.out_b.offset] += g.sum();
        let mut dx = g.dot(&out_w.t()); // n x d
        let mut ds = Array2::<f64>::zeros(sample.syn_tokens.raw_dim());

        for (l, lc) in slots.layers.iter().zip(&sample.layers).rev() {
            // feed-forward residual
            acc(&l.w2, grad, &lc.act.t().dot(&dx));
            acc(&l.b2, grad, &row_sum(&dx));
            let dz = dx.dot(&l.w2.view(values).t()) * lc.z.mapv(silu_grad);
            acc(&l.w1, grad, &lc.x_mid.t().dot(&dz));
            acc(&l.b1, grad, &row_sum(&dz));
            let dx_mid = &dx + &dz.dot(&l.w1.view(values).t());

            // attention residual
            acc(&l.wo, grad, &lc.o.t().dot(&dx_mid));
            let d_o = dx_mid.dot(&l.wo.view(values).t());
            let d_attn = d_o.dot(&lc.v.t());
            let dv = lc.attn.t().dot(&d_o);
            let mut d_scores = Array2::zeros(lc.attn.raw_dim());
            for ((mut ds_row, a_row), da_row) in d_scores
                .rows_mut()
                .into_iter()
                .zip(lc.attn.rows())
                .zip(d_attn.rows())
            {
                let dot: f64 = a_row.iter().zip(da_row).map(|(a, g)| a * g).sum();
                for ((o, &a), &ga) in ds_row.iter_mut().zip(a_row).zip(da_row) {
                    *o = a * (ga - dot) * scale;
                }
            }
            let dq = d_scores.dot(&lc.k);
            let dk = d_scores.t().dot(&lc.q);
            acc(&l.wq, grad, &lc.x_in.t().dot(&dq));
            acc(&l.wk, grad, &sample.syn_tokens.t().dot(&dk));
            acc(&l.wv, grad, &sample.syn_tokens.t().dot(&dv));
            ds = ds + dk.dot(&l.wk.view(values).t()) + dv.dot(&l.wv.view(values).t());
            dx = dx_mid + dq.dot(&l.wq.view(values).t());
        }

        // token construction
        let mag = batch.magnitude.row(r);
        let syn = batch.syndrome.row(r);
        let mag_w = slots.mag_w.view(values);
        {
            let mut gw = slots.mag_w.view_mut(grad);
            for (row, &v) in dx.rows().into_iter().zip(mag) {
                gw.row_mut(0).scaled_add(v, &row);
            }
        }
        {
            let mut gw = slots.syn_w.view_mut(grad);
            for (row, &v) in ds.rows().into_iter().zip(syn) {
                gw.row_mut(0).scaled_add(v, &row);
            }
        }
        acc(&slots.mag_pos, grad, &dx);
        acc(&slots.syn_pos, grad, &ds);
        d_cond
            .row_mut(r)
            .assign(&(dx.sum_axis(Axis(0)) + ds.sum_axis(Axis(0))));
        let dm: Array1<f64> = dx.dot(&mag_w.row(0));
        d_mag.row_mut(r).assign(&dm);
    }

    acc(&slots.cond_w, grad, &cache.emb.t().dot(&d_cond));
    acc(&slots.cond_b, grad, &row_sum(&d_cond));
    let d_emb = d_cond.dot(&slots.cond_w.view(values).t());
    let condition = embed::backward(&slots.embed, values, &cache.embed, d_emb.view(), grad);
    InputGrads {
        magnitude: d_mag,
        condition,
    }
}
