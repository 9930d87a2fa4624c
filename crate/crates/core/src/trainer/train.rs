//! The training loop: batch sampling along forward trajectories, the three
//! objectives behind one step function, Adam, cosine decay and EMA.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::losses::{bce_bit, clamp_prob, hard_decision};
use super::optim::{cosine_lr, ema_update, Adam};
use crate::backbone::ops::sigmoid;
use crate::backbone::{
    preprocess, BackboneConfig, Checkpoint, InputBatch, ModelParams, Network, OutputHead,
    TrainingBlock,
};
use crate::channel::{modulate_bpsk, RngStream};
use crate::codes::{Code, ParityCheckMatrix};
use crate::diffusion::{ddecc_target, sample_pair, sample_step, DiffusionSchedule, DEFAULT_BETA_STEP};
use crate::error::{Error, Result};
use crate::syndrome::{hard_error_sum, soft_condition_clamped, soft_loss_grad_into};

/// Floor on the syndrome sigma derived from the diffusion variance.
pub const MIN_SYNDROME_SIGMA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Eccfm,
    VanillaCm,
    Ddecc,
}

impl Objective {
    /// The output head each objective trains.
    pub fn head(self) -> OutputHead {
        match self {
            Self::Ddecc => OutputHead::Noise,
            _ => OutputHead::Codeword,
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eccfm" => Ok(Self::Eccfm),
            "vanilla_cm" | "vanilla-cm" => Ok(Self::VanillaCm),
            "ddecc" => Ok(Self::Ddecc),
            other => Err(Error::InvalidConfig(format!("unknown objective {other:?}"))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Eccfm => "eccfm",
            Self::VanillaCm => "vanilla_cm",
            Self::Ddecc => "ddecc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    #[default]
    Soft,
    Hard,
}

impl std::str::FromStr for ConditionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(Self::Soft),
            "hard" => Ok(Self::Hard),
            other => Err(Error::InvalidConfig(format!("unknown condition {other:?}"))),
        }
    }
}

impl std::fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Soft => "soft",
            Self::Hard => "hard",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub lr_init: f64,
    pub lr_final: f64,
    pub lambda_syn: f64,
    pub alpha: f64,
    pub ema_decay: f64,
    /// Constant `w(t)`.
    pub weighting: f64,
    pub objective: Objective,
    pub condition_kind: ConditionKind,
    pub beta_step: f64,
    /// Overrides `N = n - k + 5`.
    pub steps_override: Option<usize>,
    /// Fixed sigma for the soft syndrome; `None` uses `sqrt(cum(t))`.
    pub syndrome_sigma: Option<f64>,
    /// Train on the all-zero codeword only.
    pub zero_codeword: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1500,
            steps_per_epoch: 1000,
            batch_size: 128,
            lr_init: 1e-4,
            lr_final: 5e-7,
            lambda_syn: 0.01,
            alpha: 0.8,
            ema_decay: 0.999,
            weighting: 1.0,
            objective: Objective::Eccfm,
            condition_kind: ConditionKind::Soft,
            beta_step: DEFAULT_BETA_STEP,
            steps_override: None,
            syndrome_sigma: None,
            zero_codeword: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// 200 epochs of 200 steps, everything else at the defaults.
    pub fn desk() -> Self {
        Self {
            epochs: 200,
            steps_per_epoch: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.batch_size == 0 {
            return bad("epochs, steps_per_epoch and batch_size must be positive".into());
        }
        for (name, v) in [
            ("lr_init", self.lr_init),
            ("lr_final", self.lr_final),
            ("beta_step", self.beta_step),
            ("weighting", self.weighting),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.lambda_syn >= 0.0 && self.lambda_syn.is_finite()) {
            return bad(format!("lambda_syn must be non-negative, got {}", self.lambda_syn));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad(format!("ema_decay {} outside [0, 1)", self.ema_decay));
        }
        if let Some(s) = self.syndrome_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("syndrome_sigma must be positive, got {s}"));
            }
        }
        if self.steps_override == Some(0) {
            return bad("steps_override must be at least 1".into());
        }
        if self.objective == Objective::Ddecc && self.condition_kind != ConditionKind::Hard {
            return bad("the ddecc objective conditions on the hard syndrome sum".into());
        }
        Ok(())
    }

    pub fn schedule(&self, code: &Code) -> Result<DiffusionSchedule> {
        match self.steps_override {
            Some(n) => DiffusionSchedule::new(self.beta_step, n),
            None => DiffusionSchedule::for_code(&code.h, self.beta_step),
        }
    }

    /// Syndrome sigma at cumulative diffusion variance `var`.
    pub fn syndrome_sigma_at(&self, var: f64) -> f64 {
        self.syndrome_sigma
            .unwrap_or_else(|| var.sqrt().max(MIN_SYNDROME_SIGMA))
    }
}

/// Noise-level condition of `x` under the chosen kind.
pub fn condition_of(
    kind: ConditionKind,
    x: &[f64],
    h: &ParityCheckMatrix,
    sigma: f64,
) -> Result<f64> {
    match kind {
        ConditionKind::Soft => soft_condition_clamped(x, h, sigma),
        ConditionKind::Hard => Ok(hard_error_sum(x, h) as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    /// The BCE part of the loss alone.
    pub consistency: f64,
    /// Mean condition of the `x_t` inputs.
    pub condition_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams,
    pub ema: ModelParams,
    pub adam: Adam,
    pub epoch: usize,
    pub global_step: u64,
    pub history: Vec<StepRecord>,
}

/// One sampled training batch.
#[derive(Debug, Clone)]
pub struct PreparedBatch {
    pub x0_bits: Vec<Vec<u8>>,
    pub steps: Vec<usize>,
    pub input_t: InputBatch,
    pub input_r: InputBatch,
    pub sigma_t: Vec<f64>,
    pub sigma_r: Vec<f64>,
    pub noise_target: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub consistency: f64,
    pub condition_mean: f64,
}

/// BCE gradient with respect to the logit; zero where the clamp is active.
#[inline]
fn bce_logit_grad(p: f64, x: u8) -> f64 {
    if clamp_prob(p) != p {
        0.0
    } else {
        p - f64::from(x)
    }
}

pub struct Trainer {
    code: Code,
    network: Network,
    schedule: DiffusionSchedule,
    cfg: TrainConfig,
    state: TrainState,
}

impl Trainer {
    pub fn new(code: &Code, backbone: BackboneConfig, cfg: TrainConfig) -> Result<Self> {
        let params = ModelParams::init(backbone, cfg.seed)?;
        Self::with_state(code, cfg, params, None)
    }

    /// Continues from a checkpoint; parameters-only checkpoints restart the
    /// optimizer at epoch 0.
    pub fn resume(code: &Code, cfg: TrainConfig, ckpt: Checkpoint) -> Result<Self> {
        Self::with_state(code, cfg, ckpt.params, ckpt.training)
    }

    fn with_state(
        code: &Code,
        cfg: TrainConfig,
        params: ModelParams,
        block: Option<TrainingBlock>,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        let bc = params.config;
        if bc.n != code.n() || bc.m != code.m() {
            return Err(Error::InvalidConfig(format!(
                "backbone is sized for n={} m={}, code has n={} m={}",
                bc.n,
                bc.m,
                code.n(),
                code.m()
            )));
        }
        if bc.head != cfg.objective.head() {
            return Err(Error::InvalidConfig(format!(
                "objective {} needs the {:?} head",
                cfg.objective,
                cfg.objective.head()
            )));
        }
        let schedule = cfg.schedule(code)?;
        let count = params.count();
        let mut state = TrainState {
            ema: params.clone(),
            params,
            adam: Adam::new(count),
            epoch: 0,
            global_step: 0,
            history: Vec::new(),
        };
        if let Some(b) = block {
            for (what, len) in [("adam_m", b.adam_m.len()), ("adam_v", b.adam_v.len()), ("ema", b.ema.len())] {
                crate::error::check_len(what, count, len)?;
            }
            state.epoch = b.epoch as usize;
            state.global_step = b.global_step;
            state.adam.step = b.adam_step;
            state.adam.m = b.adam_m;
            state.adam.v = b.adam_v;
            state.ema.values = b.ema;
        }
        Ok(Self {
            code: code.clone(),
            network: Network::new(bc),
            schedule,
            cfg,
            state,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.schedule
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn code(&self) -> &Code {
        &self.code
    }

    pub fn is_done(&self) -> bool {
        self.state.epoch >= self.cfg.epochs
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.state.params.clone(),
            training: Some(TrainingBlock {
                epoch: self.state.epoch as u64,
                global_step: self.state.global_step,
                adam_step: self.state.adam.step,
                adam_m: self.state.adam.m.clone(),
                adam_v: self.state.adam.v.clone(),
                ema: self.state.ema.values.clone(),
            }),
        }
    }

    /// Weights used for evaluation.
    pub fn ema_params(&self) -> &ModelParams {
        &self.state.ema
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    /// Data stream of one epoch; resuming at an epoch boundary replays it.
    pub fn epoch_rng(&self, epoch: usize) -> RngStream {
        RngStream::new(self.cfg.seed, 1000 + epoch as u64)
    }

    pub fn prepare_batch(&self, rng: &mut RngStream) -> Result<PreparedBatch> {
        let code = &self.code;
        let (n, m, k) = (code.n(), code.m(), code.k());
        let b = self.cfg.batch_size;
        let mut out = PreparedBatch {
            x0_bits: Vec::with_capacity(b),
            steps: Vec::with_capacity(b),
            input_t: InputBatch::with_capacity(b, n, m),
            input_r: InputBatch::with_capacity(b, n, m),
            sigma_t: Vec::with_capacity(b),
            sigma_r: Vec::with_capacity(b),
            noise_target: Vec::with_capacity(b),
        };
        for row in 0..b {
            let bits = if self.cfg.zero_codeword {
                vec![0u8; n]
            } else {
                let msg: Vec<u8> = (0..k).map(|_| rng.bit()).collect();
                code.g.encode(&msg)?.bits
            };
            let x0 = modulate_bpsk(&bits)?;
            let t = sample_step(rng, &self.schedule);
            let pair = sample_pair(&x0, t, self.cfg.alpha, &self.schedule, rng)?;
            let st = self.cfg.syndrome_sigma_at(self.schedule.cumulative(t as f64)?);
            let sr = self.cfg.syndrome_sigma_at(self.schedule.cumulative(pair.r)?);
            let kind = self.cfg.condition_kind;
            let it = preprocess(&pair.x_t, &code.h)?
                .with_condition(condition_of(kind, &pair.x_t, &code.h, st)?);
            let ir = preprocess(&pair.x_r, &code.h)?
                .with_condition(condition_of(kind, &pair.x_r, &code.h, sr)?);
            out.input_t.set_row(row, &it)?;
            out.input_r.set_row(row, &ir)?;
            out.noise_target.push(ddecc_target(&x0, &pair.x_t));
            out.x0_bits.push(bits);
            out.steps.push(t);
            out.sigma_t.push(st);
            out.sigma_r.push(sr);
        }
        Ok(out)
    }

    /// Loss of the configured objective and its gradient at `values`.
    pub fn objective_grad(
        &self,
        values: &[f64],
        batch: &PreparedBatch,
    ) -> Result<(LossParts, Vec<f64>)> {
        let net = &self.network;
        let h = &self.code.h;
        let n = self.code.n();
        let rows = batch.input_t.len();
        let inv_b = 1.0 / rows as f64;
        let inv_n = 1.0 / n as f64;
        let w = self.cfg.weighting;
        let lambda = self.cfg.lambda_syn;
        let mut grad = vec![0.0; values.len()];
        let condition_mean = batch.input_t.condition.mean().unwrap_or(0.0);

        // Per-row BCE and its logit gradient against a per-row target.
        let bce_rows = |logits: &Array2<f64>, targets: &[Vec<u8>], scale: f64| {
            let mut d = Array2::zeros(logits.raw_dim());
            let mut loss = 0.0;
            for (r, target) in targets.iter().enumerate() {
                for i in 0..n {
                    let p = sigmoid(logits[[r, i]]);
                    loss += bce_bit(p, target[i]) * inv_n;
                    d[[r, i]] = scale * bce_logit_grad(p, target[i]) * inv_n * inv_b;
                }
            }
            (loss * inv_b * scale, d)
        };

        let parts = match self.cfg.objective {
            Objective::Eccfm => {
                let (lt, ct) = net.forward_cached(values, &batch.input_t)?;
                let (lr, cr) = net.forward_cached(values, &batch.input_r)?;
                let (bce_t, mut dt) = bce_rows(&lt, &batch.x0_bits, w);
                let (bce_r, mut dr) = bce_rows(&lr, &batch.x0_bits, w);
                let mut reg = 0.0;
                if lambda != 0.0 {
                    let mut gv = vec![0.0; n];
                    for (logits, d, sigmas) in [
                        (&lt, &mut dt, &batch.sigma_t),
                        (&lr, &mut dr, &batch.sigma_r),
                    ] {
                        for r in 0..rows {
                            let p: Vec<f64> = logits.row(r).iter().map(|&l| sigmoid(l)).collect();
                            let v: Vec<f64> = p.iter().map(|&p| 1.0 - 2.0 * p).collect();
                            gv.iter_mut().for_each(|g| *g = 0.0);
                            reg += soft_loss_grad_into(&v, h, sigmas[r], 1.0, &mut gv);
                            for i in 0..n {
                                d[[r, i]] += lambda * inv_b * gv[i] * (-2.0 * p[i] * (1.0 - p[i]));
                            }
                        }
                    }
                }
                net.backward(values, &batch.input_t, &ct, dt.view(), &mut grad)?;
                net.backward(values, &batch.input_r, &cr, dr.view(), &mut grad)?;
                let consistency = bce_t + bce_r;
                LossParts {
                    total: consistency + lambda * reg * inv_b,
                    consistency,
                    condition_mean,
                }
            }
            Objective::VanillaCm => {
                let target_logits = net.forward(&self.state.ema.values, &batch.input_r)?;
                let targets: Vec<Vec<u8>> = target_logits
                    .rows()
                    .into_iter()
                    .map(|row| hard_decision(&row.iter().map(|&l| sigmoid(l)).collect::<Vec<_>>()))
                    .collect();
                let (lt, ct) = net.forward_cached(values, &batch.input_t)?;
                let (loss, dt) = bce_rows(&lt, &targets, w);
                net.backward(values, &batch.input_t, &ct, dt.view(), &mut grad)?;
                LossParts {
                    total: loss,
                    consistency: loss,
                    condition_mean,
                }
            }
            Objective::Ddecc => {
                let (lt, ct) = net.forward_cached(values, &batch.input_t)?;
                let (loss, dt) = bce_rows(&lt, &batch.noise_target, w);
                net.backward(values, &batch.input_t, &ct, dt.view(), &mut grad)?;
                LossParts {
                    total: loss,
                    consistency: loss,
                    condition_mean,
                }
            }
        };
        Ok((parts, grad))
    }

    /// One optimizer step on a prepared batch.
    pub fn train_step(&mut self, batch: &PreparedBatch) -> Result<StepRecord> {
        let lr = cosine_lr(self.state.epoch, self.cfg.epochs, self.cfg.lr_init, self.cfg.lr_final);
        let (parts, grad) = self.objective_grad(&self.state.params.values, batch)?;
        if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "training loss {} at epoch {} step {}; batch steps {:?}, conditions {:?}, sigma_t {:?}",
                parts.total,
                self.state.epoch,
                self.state.global_step,
                batch.steps,
                batch.input_t.condition.to_vec(),
                batch.sigma_t
            )));
        }
        self.state.adam.update(&mut self.state.params.values, &grad, lr);
        ema_update(&mut self.state.ema.values, &self.state.params.values, self.cfg.ema_decay);
        let record = StepRecord {
            step: self.state.global_step,
            epoch: self.state.epoch,
            lr,
            loss: parts.total,
            consistency: parts.consistency,
            condition_mean: parts.condition_mean,
        };
        self.state.global_step += 1;
        self.state.history.push(record);
        Ok(record)
    }

    /// Runs one full epoch and returns its mean loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let mut rng = self.epoch_rng(self.state.epoch);
        let mut total = 0.0;
        for _ in 0..self.cfg.steps_per_epoch {
            let batch = self.prepare_batch(&mut rng)?;
            total += self.train_step(&batch)?.loss;
        }
        self.state.epoch += 1;
        Ok(total / self.cfg.steps_per_epoch as f64)
    }

    /// Trains until the configured number of epochs is reached.
    pub fn fit(&mut self) -> Result<()> {
        while !self.is_done() {
            self.run_epoch()?;
        }
        Ok(())
    }
}
