//! Flat parameter storage, named layouts and the checkpoint byte format.

use ndarray::{ArrayView2, ArrayViewMut2};

use super::{BackboneConfig, BackboneKind, OutputHead};
use crate::channel::RngStream;
use crate::error::{Error, Result};

/// Checkpoint/parameter format version.
pub const PARAMS_VERSION: u32 = 1;

const MAGIC: &[u8; 8] = b"ECCFMCKP";

/// A `rows x cols` tensor stored row-major inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn view<'a>(&self, values: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(
            (self.rows, self.cols),
            &values[self.offset..self.offset + self.len()],
        )
        .expect("slot fits layout")
    }

    pub fn view_mut<'a>(&self, values: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape(
            (self.rows, self.cols),
            &mut values[self.offset..self.offset + self.len()],
        )
        .expect("slot fits layout")
    }

    /// Row `0` of a `1 x cols` slot as a plain slice.
    pub fn slice<'a>(&self, values: &'a [f64]) -> &'a [f64] {
        &values[self.offset..self.offset + self.len()]
    }
}

/// How a slot is initialised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zero,
    /// Uniform in `+-1/sqrt(fan_in)`.
    FanIn(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutEntry {
    pub name: String,
    pub slot: Slot,
    pub init: Init,
}

/// Named slices of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    entries: Vec<LayoutEntry>,
    total: usize,
}

impl Layout {
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, init: Init) -> Slot {
        let slot = Slot {
            offset: self.total,
            rows,
            cols,
        };
        self.total += slot.len();
        self.entries.push(LayoutEntry {
            name: name.into(),
            slot,
            init,
        });
        slot
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<Slot> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.slot)
    }
}

/// Model weights: architecture, layout and the flat value vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: BackboneConfig,
    pub values: Vec<f64>,
    pub version: u32,
}

impl ModelParams {
    /// Freshly initialised weights.
    pub fn init(config: BackboneConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let mut rng = RngStream::new(seed, 0x1417);
        let mut values = vec![0.0; layout.total()];
        for entry in layout.entries() {
            if let Init::FanIn(fan_in) = entry.init {
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                let s = entry.slot;
                for v in &mut values[s.offset..s.offset + s.len()] {
                    *v = bound * (2.0 * rng.uniform() - 1.0);
                }
            }
        }
        Ok(Self {
            config,
            values,
            version: PARAMS_VERSION,
        })
    }

    /// All-zero weights.
    pub fn zeros(config: BackboneConfig) -> Result<Self> {
        config.validate()?;
        let total = config.layout().total();
        Ok(Self {
            config,
            values: vec![0.0; total],
            version: PARAMS_VERSION,
        })
    }

    pub fn layout(&self) -> Layout {
        self.config.layout()
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.config.layout().total() {
            return Err(Error::LengthMismatch {
                what: "parameter vector",
                expected: self.config.layout().total(),
                got: self.values.len(),
            });
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i} is {}", self.values[i])));
        }
        Ok(())
    }
}

/// Optimizer and EMA state carried in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBlock {
    pub epoch: u64,
    pub global_step: u64,
    pub adam_step: u64,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub ema: Vec<f64>,
}

/// Parameters plus optional training state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub training: Option<TrainingBlock>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    put_u64(out, vs.len() as u64);
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let len = self.u64()? as usize;
        let raw = self.take(len.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl Checkpoint {
    /// Serializes to the little-endian checkpoint layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.params.config;
        let mut out = Vec::with_capacity(64 + 8 * self.params.values.len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, self.params.version);
        out.push(c.kind as u8);
        out.push(c.head as u8);
        for v in [c.n, c.m, c.depth, c.width, c.embed_dim] {
            put_u32(&mut out, v as u32);
        }
        put_f64s(&mut out, &self.params.values);
        match &self.training {
            None => out.push(0),
            Some(t) => {
                out.push(1);
                put_u64(&mut out, t.epoch);
                put_u64(&mut out, t.global_step);
                put_u64(&mut out, t.adam_step);
                put_f64s(&mut out, &t.adam_m);
                put_f64s(&mut out, &t.adam_v);
                put_f64s(&mut out, &t.ema);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != PARAMS_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = match r.u8()? {
            0 => BackboneKind::Mlp,
            1 => BackboneKind::TinyCrossAttention,
            k => return Err(Error::Checkpoint(format!("unknown backbone kind {k}"))),
        };
        let head = match r.u8()? {
            0 => OutputHead::Codeword,
            1 => OutputHead::Noise,
            h => return Err(Error::Checkpoint(format!("unknown output head {h}"))),
        };
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let [n, m, depth, width, embed_dim] = dims;
        let config = BackboneConfig {
            kind,
            head,
            n,
            m,
            depth,
            width,
            embed_dim,
        };
        config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let values = r.f64s()?;
        let params = ModelParams {
            config,
            values,
            version,
        };
        params.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let training = match r.u8()? {
            0 => None,
            1 => {
                let epoch = r.u64()?;
                let global_step = r.u64()?;
                let adam_step = r.u64()?;
                let adam_m = r.f64s()?;
                let adam_v = r.f64s()?;
                let ema = r.f64s()?;
                let total = params.count();
                if adam_m.len() != total || adam_v.len() != total || ema.len() != total {
                    return Err(Error::Checkpoint("training block layout mismatch".into()));
                }
                Some(TrainingBlock {
                    epoch,
                    global_step,
                    adam_step,
                    adam_m,
                    adam_v,
                    ema,
                })
            }
            f => return Err(Error::Checkpoint(format!("bad training flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { params, training })
    }
}
