//! The differentiable decoder network: input preprocessing, condition
//! embedding, two backbone kinds with exact reverse-mode gradients, and
//! parameter persistence.
//!
//! The network body sees only `|y|`, the bipolar hard syndrome and the
//! embedded condition. Its raw per-bit outputs are read either as
//! multiplicative-noise logits ([`OutputHead::Noise`]) or, multiplied by the
//! hard-decision signs of `y`, as codeword-bit logits
//! ([`OutputHead::Codeword`]). The latter keeps the decoder equivariant to the
//! transmitted codeword, so training on the all-zero word generalizes.

mod attention;
mod embed;
mod mlp;
pub(crate) mod ops;
mod params;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use embed::embed_condition;
pub use params::{Checkpoint, Init, Layout, LayoutEntry, ModelParams, Slot, TrainingBlock, PARAMS_VERSION};

use crate::channel::{hard_bit, sign};
use crate::codes::ParityCheckMatrix;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum BackboneKind {
    #[default]
    Mlp = 0,
    TinyCrossAttention = 1,
}

impl std::str::FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Self::Mlp),
            "tiny_cross_attention" | "xattn" => Ok(Self::TinyCrossAttention),
            other => Err(Error::InvalidConfig(format!("unknown backbone {other:?}"))),
        }
    }
}

/// How raw network outputs are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum OutputHead {
    /// Logits of `P(x0_i = 1)`: raw output times `sign(y_i)`.
    #[default]
    Codeword = 0,
    /// Logits of `P(sign flip at i)`.
    Noise = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub kind: BackboneKind,
    pub head: OutputHead,
    /// Code length (number of output logits).
    pub n: usize,
    /// Number of checks.
    pub m: usize,
    pub depth: usize,
    pub width: usize,
    pub embed_dim: usize,
}

impl BackboneConfig {
    /// Desk-scale MLP defaults: depth 3, width 64, embed 16.
    pub fn mlp(n: usize, m: usize) -> Self {
        Self {
            kind: BackboneKind::Mlp,
            head: OutputHead::Codeword,
            n,
            m,
            depth: 3,
            width: 64,
            embed_dim: 16,
        }
    }

    pub fn tiny_cross_attention(n: usize, m: usize) -> Self {
        Self {
            kind: BackboneKind::TinyCrossAttention,
            depth: 2,
            width: 16,
            ..Self::mlp(n, m)
        }
    }

    pub fn for_code(kind: BackboneKind, h: &ParityCheckMatrix) -> Self {
        match kind {
            BackboneKind::Mlp => Self::mlp(h.n(), h.m()),
            BackboneKind::TinyCrossAttention => Self::tiny_cross_attention(h.n(), h.m()),
        }
    }

    pub fn with_head(mut self, head: OutputHead) -> Self {
        self.head = head;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 || self.embed_dim == 0 {
            return Err(Error::InvalidConfig(
                "depth, width and embed_dim must be at least 1".into(),
            ));
        }
        if self.n == 0 || self.m == 0 || self.m >= self.n {
            return Err(Error::InvalidConfig(format!(
                "invalid code dimensions n={} m={}",
                self.n, self.m
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Network::new(*self).layout
    }

    pub fn param_count(&self) -> usize {
        self.layout().total()
    }

    pub(crate) fn embed_slots(&self) -> embed::EmbedSlots {
        // The embedding is always registered first.
        embed::EmbedSlots::register(&mut Layout::default(), self.embed_dim)
    }
}

/// Preprocessed network input for one received word.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderInput {
    /// `|y|`.
    pub magnitude: Vec<f64>,
    /// Hard syndrome mapped 0 -> +1, 1 -> -1.
    pub syndrome_bipolar: Vec<f64>,
    /// Noise-level condition (soft `e_soft` or hard `e_hard`).
    pub condition: f64,
    /// `sign(y)` with `sign(0) = +1`; applied after the body for the codeword head.
    pub signs: Vec<f64>,
}

impl DecoderInput {
    pub fn with_condition(mut self, condition: f64) -> Self {
        self.condition = condition;
        self
    }

    /// Length of the concatenated `[|y|, s(y)]` feature vector.
    pub fn feature_len(&self) -> usize {
        self.magnitude.len() + self.syndrome_bipolar.len()
    }
}

/// Builds `[|y|, s(y)]` (condition left at 0 for the caller to fill).
pub fn preprocess(y: &[f64], h: &ParityCheckMatrix) -> Result<DecoderInput> {
    check_len("received signal", h.n(), y.len())?;
    if y.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in received signal".into()));
    }
    let bits: Vec<u8> = y.iter().map(|&v| hard_bit(v)).collect();
    let syndrome_bipolar = h
        .syndrome_unchecked(&bits)
        .into_iter()
        .map(|s| if s == 0 { 1.0 } else { -1.0 })
        .collect();
    Ok(DecoderInput {
        magnitude: y.iter().map(|v| v.abs()).collect(),
        syndrome_bipolar,
        condition: 0.0,
        signs: y.iter().map(|&v| sign(v)).collect(),
    })
}

/// A batch of inputs stacked row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBatch {
    pub magnitude: Array2<f64>,
    pub syndrome: Array2<f64>,
    pub condition: Array1<f64>,
    pub signs: Array2<f64>,
}

impl InputBatch {
    pub fn with_capacity(rows: usize, n: usize, m: usize) -> Self {
        Self {
            magnitude: Array2::zeros((rows, n)),
            syndrome: Array2::zeros((rows, m)),
            condition: Array1::zeros(rows),
            signs: Array2::zeros((rows, n)),
        }
    }

    pub fn from_inputs(inputs: &[DecoderInput]) -> Result<Self> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
        let (n, m) = (first.magnitude.len(), first.syndrome_bipolar.len());
        let mut batch = Self::with_capacity(inputs.len(), n, m);
        for (r, input) in inputs.iter().enumerate() {
            batch.set_row(r, input)?;
        }
        Ok(batch)
    }

    pub fn set_row(&mut self, r: usize, input: &DecoderInput) -> Result<()> {
        check_len("magnitude", self.magnitude.ncols(), input.magnitude.len())?;
        check_len("syndrome", self.syndrome.ncols(), input.syndrome_bipolar.len())?;
        check_len("signs", self.signs.ncols(), input.signs.len())?;
        for (dst, &v) in self.magnitude.row_mut(r).iter_mut().zip(&input.magnitude) {
            *dst = v;
        }
        for (dst, &v) in self.syndrome.row_mut(r).iter_mut().zip(&input.syndrome_bipolar) {
            *dst = v;
        }
        for (dst, &v) in self.signs.row_mut(r).iter_mut().zip(&input.signs) {
            *dst = v;
        }
        self.condition[r] = input.condition;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.condition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, cfg: &BackboneConfig) -> Result<()> {
        check_len("magnitude width", cfg.n, self.magnitude.ncols())?;
        check_len("syndrome width", cfg.m, self.syndrome.ncols())?;
        check_len("signs width", cfg.n, self.signs.ncols())?;
        let finite = self.magnitude.iter().all(|v| v.is_finite())
            && self.syndrome.iter().all(|v| v.is_finite())
            && self.condition.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }
}

/// Gradients with respect to the continuous inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGrads {
    pub magnitude: Array2<f64>,
    pub condition: Array1<f64>,
}

#[derive(Debug, Clone)]
enum Slots {
    Mlp(mlp::MlpSlots),
    Attention(attention::AttentionSlots),
}

enum CacheInner {
    Mlp(mlp::MlpCache),
    Attention(attention::AttentionCache),
}

/// Intermediate activations kept for a backward pass.
pub struct ForwardCache {
    inner: CacheInner,
}

/// A backbone architecture with its parameter layout resolved.
#[derive(Debug, Clone)]
pub struct Network {
    config: BackboneConfig,
    layout: Layout,
    slots: Slots,
}

impl Network {
    pub fn new(config: BackboneConfig) -> Self {
        let mut layout = Layout::default();
        let slots = match config.kind {
            BackboneKind::Mlp => Slots::Mlp(mlp::MlpSlots::register(&config, &mut layout)),
            BackboneKind::TinyCrossAttention => {
                Slots::Attention(attention::AttentionSlots::register(&config, &mut layout))
            }
        };
        Self {
            config,
            layout,
            slots,
        }
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn check(&self, values: &[f64], batch: &InputBatch) -> Result<()> {
        check_len("parameter vector", self.layout.total(), values.len())?;
        batch.validate(&self.config)
    }

    /// Output logits (`B x n`) without keeping activations.
    pub fn forward(&self, values: &[f64], batch: &InputBatch) -> Result<Array2<f64>> {
        Ok(self.forward_cached(values, batch)?.0)
    }

    pub fn forward_cached(
        &self,
        values: &[f64],
        batch: &InputBatch,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        self.check(values, batch)?;
        let (raw, inner) = match &self.slots {
            Slots::Mlp(s) => {
                let (raw, c) = mlp::forward(s, values, batch);
                (raw, CacheInner::Mlp(c))
            }
            Slots::Attention(s) => {
                let (raw, c) = attention::forward(s, values, batch);
                (raw, CacheInner::Attention(c))
            }
        };
        let logits = match self.config.head {
            OutputHead::Codeword => raw * &batch.signs,
            OutputHead::Noise => raw,
        };
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok((logits, ForwardCache { inner }))
    }

    /// Accumulates `d<logits, cotangent>/d(params)` into `grad` and returns
    /// input gradients.
    pub fn backward(
        &self,
        values: &[f64],
        batch: &InputBatch,
        cache: &ForwardCache,
        cotangent: ArrayView2<f64>,
        grad: &mut [f64],
    ) -> Result<InputGrads> {
        check_len("gradient vector", self.layout.total(), grad.len())?;
        if cotangent.dim() != (batch.len(), self.config.n) {
            return Err(Error::InvalidInput(format!(
                "cotangent shape {:?} does not match ({}, {})",
                cotangent.dim(),
                batch.len(),
                self.config.n
            )));
        }
        let d_raw = match self.config.head {
            OutputHead::Codeword => &cotangent * &batch.signs,
            OutputHead::Noise => cotangent.to_owned(),
        };
        Ok(match (&self.slots, &cache.inner) {
            (Slots::Mlp(s), CacheInner::Mlp(c)) => mlp::backward(s, values, c, d_raw.view(), grad),
            (Slots::Attention(s), CacheInner::Attention(c)) => {
                attention::backward(s, values, c, batch, d_raw.view(), grad)
            }
            _ => return Err(Error::InvalidInput("cache from a different backbone".into())),
        })
    }
}

/// Logits for a single input.
pub fn forward(params: &ModelParams, input: &DecoderInput) -> Result<Vec<f64>> {
    params.validate()?;
    let net = Network::new(params.config);
    let batch = InputBatch::from_inputs(std::slice::from_ref(input))?;
    Ok(net.forward(&params.values, &batch)?.row(0).to_vec())
}

/// Logits for a batch, one row per input.
pub fn forward_batch(params: &ModelParams, batch: &InputBatch) -> Result<Array2<f64>> {
    params.validate()?;
    Network::new(params.config).forward(&params.values, batch)
}

/// Gradient of `<logits, cotangent>` with respect to the parameters and the
/// continuous inputs of a single example.
pub fn backward(
    params: &ModelParams,
    input: &DecoderInput,
    cotangent: &[f64],
) -> Result<(Vec<f64>, InputGrads)> {
    params.validate()?;
    check_len("cotangent", params.config.n, cotangent.len())?;
    let net = Network::new(params.config);
    let batch = InputBatch::from_inputs(std::slice::from_ref(input))?;
    let (_, cache) = net.forward_cached(&params.values, &batch)?;
    let cot = ArrayView2::from_shape((1, cotangent.len()), cotangent).expect("row vector");
    let mut grad = vec![0.0; params.count()];
    let inputs = net.backward(&params.values, &batch, &cache, cot, &mut grad)?;
    Ok((grad, inputs))
}
