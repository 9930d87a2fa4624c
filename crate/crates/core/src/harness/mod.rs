//! Evaluation, benchmarking and tracing, plus the experiment configuration
//! shared with the command-line front end. Nothing here touches the file
//! system.

mod bench;
mod eval;
mod trace;

pub use bench::{run_benchmark, run_convergence_stats, BenchOptions, BenchRow, ConvergenceRow};
pub use eval::{describe_channel, frame, run_eval, EvalOptions, EvalResult, Frame, StopRule};
pub use trace::{max_step_changes, trace_csv, trace_trajectory, TraceRow};

use serde::{Deserialize, Serialize};

use crate::backbone::{BackboneConfig, BackboneKind, ModelParams, OutputHead};
use crate::channel::{ChannelConfig, ChannelKind};
use crate::codes::Code;
use crate::decoders::{
    BpDecoder, DdeccDecoder, Decoder, MlDecoder, MultiStepDecoder, NeuralModel, OneStepDecoder,
    UncodedDecoder,
};
use crate::diffusion::{DiffusionSchedule, DEFAULT_BETA_STEP};
use crate::error::{Error, Result};
use crate::trainer::{ConditionKind, TrainConfig};

/// Crate version written into result files.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    #[default]
    Eccfm,
    EccfmMulti,
    Ddecc,
    Bp,
    Ml,
    Uncoded,
}

impl DecoderKind {
    pub fn is_neural(self) -> bool {
        matches!(self, Self::Eccfm | Self::EccfmMulti | Self::Ddecc)
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "eccfm" => Self::Eccfm,
            "eccfm_multi" => Self::EccfmMulti,
            "ddecc" => Self::Ddecc,
            "bp" => Self::Bp,
            "ml" => Self::Ml,
            "uncoded" => Self::Uncoded,
            other => return Err(Error::InvalidConfig(format!("unknown decoder {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderSpec {
    pub kind: DecoderKind,
    /// Trained weights for the neural decoders.
    pub checkpoint: Option<String>,
    pub condition: ConditionKind,
    pub bp_iters: usize,
    /// DDECC step limit; `None` means `2N`.
    pub max_steps: Option<usize>,
    pub n_steps: usize,
    pub renoise_fraction: f64,
}

impl Default for DecoderSpec {
    fn default() -> Self {
        Self {
            kind: DecoderKind::default(),
            checkpoint: None,
            condition: ConditionKind::Soft,
            bp_iters: 20,
            max_steps: None,
            n_steps: 2,
            renoise_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub kind: ChannelKind,
    pub ebn0_db: f64,
    pub rayleigh_scale: f64,
    pub sigma_override: Option<f64>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            kind: ChannelKind::Awgn,
            ebn0_db: 4.0,
            rayleigh_scale: 1.0,
            sigma_override: None,
        }
    }
}

impl ChannelSection {
    pub fn resolve(&self, code: &Code) -> ChannelConfig {
        ChannelConfig {
            kind: self.kind,
            ebn0_db: self.ebn0_db,
            rate: code.rate(),
            rayleigh_scale: self.rayleigh_scale,
            sigma_override: self.sigma_override,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneSection {
    pub kind: BackboneKind,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub embed_dim: Option<usize>,
}

impl BackboneSection {
    pub fn resolve(&self, code: &Code, head: OutputHead) -> BackboneConfig {
        let base = BackboneConfig::for_code(self.kind, &code.h).with_head(head);
        BackboneConfig {
            depth: self.depth.unwrap_or(base.depth),
            width: self.width.unwrap_or(base.width),
            embed_dim: self.embed_dim.unwrap_or(base.embed_dim),
            ..base
        }
    }
}

/// Everything one run needs; written beside every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in code id or path to an alist / dense matrix file.
    pub code: String,
    pub seed: u64,
    pub output_dir: String,
    pub channel: ChannelSection,
    pub backbone: BackboneSection,
    pub train: TrainConfig,
    pub decoder: DecoderSpec,
    pub stop: StopRule,
    pub eval: EvalOptions,
    pub bench: BenchOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            code: "hamming74".into(),
            seed: 0,
            output_dir: "eccfm-out".into(),
            channel: ChannelSection::default(),
            backbone: BackboneSection::default(),
            train: TrainConfig::default(),
            decoder: DecoderSpec::default(),
            stop: StopRule::default(),
            eval: EvalOptions::default(),
            bench: BenchOptions::default(),
        }
    }
}

/// Smallest per-step increment whose full schedule reaches `sigma^2`, never
/// below the default increment.
pub fn covering_beta_step(sigma: f64, total_steps: usize) -> f64 {
    DEFAULT_BETA_STEP.max(sigma * sigma / total_steps as f64)
}

impl ExperimentConfig {
    /// Checks everything that can be checked without reading files.
    /// `training` adds the requirement that the diffusion schedule covers the
    /// channel noise at `channel.ebn0_db`.
    pub fn validate(&self, code: &Code, training: bool) -> Result<()> {
        self.train.validate()?;
        self.stop.validate()?;
        let channel = self.channel.resolve(code);
        channel.validate()?;
        let schedule = self.train.schedule(code)?;
        if training {
            let sigma = channel.sigma()?;
            if !schedule.covers(sigma) {
                return Err(Error::InvalidConfig(format!(
                    "diffusion schedule reaches variance {:.4} but the channel at {} dB has {:.4}; \
                     use beta_step >= {:.4}",
                    schedule.total_steps as f64 * schedule.beta_step,
                    self.channel.ebn0_db,
                    sigma * sigma,
                    sigma * sigma / schedule.total_steps as f64
                )));
            }
        }
        let d = &self.decoder;
        if d.kind.is_neural() && d.checkpoint.is_none() && !training {
            return Err(Error::InvalidConfig(format!(
                "decoder {:?} needs a checkpoint",
                d.kind
            )));
        }
        if d.bp_iters == 0 || d.n_steps == 0 || d.max_steps == Some(0) {
            return Err(Error::InvalidConfig("decoder step counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&d.renoise_fraction) {
            return Err(Error::InvalidConfig("renoise_fraction outside [0, 1]".into()));
        }
        if self.eval.workers == 0 || self.eval.chunk == 0 {
            return Err(Error::InvalidConfig("eval workers and chunk must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self, code: &Code) -> Result<DiffusionSchedule> {
        self.train.schedule(code)
    }
}

/// Builds the configured decoder. Neural kinds need `params`.
pub fn build_decoder(
    spec: &DecoderSpec,
    code: &Code,
    schedule: DiffusionSchedule,
    params: Option<ModelParams>,
) -> Result<Box<dyn Decoder>> {
    let h = code.h.clone();
    let model = |want: OutputHead, condition: ConditionKind| -> Result<NeuralModel> {
        let p = params
            .clone()
            .ok_or_else(|| Error::InvalidConfig(format!("decoder {:?} needs model parameters", spec.kind)))?;
        if p.config.head != want {
            return Err(Error::InvalidConfig(format!(
                "decoder {:?} needs a {:?}-head model, checkpoint has {:?}",
                spec.kind, want, p.config.head
            )));
        }
        NeuralModel::new(p, &code.h, condition)
    };
    Ok(match spec.kind {
        DecoderKind::Eccfm => Box::new(OneStepDecoder {
            model: model(OutputHead::Codeword, spec.condition)?,
            h,
        }),
        DecoderKind::EccfmMulti => Box::new(MultiStepDecoder {
            model: model(OutputHead::Codeword, spec.condition)?,
            h,
            schedule,
            n_steps: spec.n_steps,
            renoise_fraction: spec.renoise_fraction,
        }),
        DecoderKind::Ddecc => {
            let mut d = DdeccDecoder::new(model(OutputHead::Noise, ConditionKind::Hard)?, h, schedule);
            if let Some(s) = spec.max_steps {
                d.max_steps = s;
            }
            Box::new(d)
        }
        DecoderKind::Bp => Box::new(BpDecoder::new(h, spec.bp_iters)?),
        DecoderKind::Ml => Box::new(MlDecoder::new(&code.g)?),
        DecoderKind::Uncoded => Box::new(UncodedDecoder { h }),
    })
}

/// Provenance written at the top of every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultHeader {
    pub version: String,
    pub seed: u64,
    pub code_hash: String,
    pub param_count: usize,
}

impl ResultHeader {
    pub fn new(seed: u64, code: &Code, param_count: usize) -> Self {
        Self {
            version: ARTIFACT_VERSION.into(),
            seed,
            code_hash: format!("{:016x}", code.h.fingerprint()),
            param_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_is_enforced_for_training() {
        let code = Code::builtin("hamming74").unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.channel.ebn0_db = 2.0;
        assert!(cfg.validate(&code, true).is_err());
        let sigma = cfg.channel.resolve(&code).sigma().unwrap();
        cfg.train.beta_step = covering_beta_step(sigma, cfg.schedule(&code).unwrap().total_steps);
        cfg.validate(&code, true).unwrap();
        assert!(cfg.schedule(&code).unwrap().covers(sigma));
    }

    #[test]
    fn neural_decoders_need_weights() {
        let code = Code::builtin("hamming74").unwrap();
        let cfg = ExperimentConfig::default();
        assert!(cfg.validate(&code, false).is_err());
        let sched = cfg.schedule(&code).unwrap();
        assert!(build_decoder(&cfg.decoder, &code, sched, None).is_err());
        let noise = ModelParams::init(BackboneConfig::mlp(7, 3).with_head(OutputHead::Noise), 0).unwrap();
        assert!(build_decoder(&cfg.decoder, &code, sched, Some(noise.clone())).is_err());
        let spec = DecoderSpec { kind: DecoderKind::Ddecc, ..DecoderSpec::default() };
        assert_eq!(build_decoder(&spec, &code, sched, Some(noise)).unwrap().id(), "ddecc");
    }

    #[test]
    fn kind_names_parse() {
        for (s, k) in [("eccfm_multi", DecoderKind::EccfmMulti), ("uncoded", DecoderKind::Uncoded)] {
            assert_eq!(s.parse::<DecoderKind>().unwrap(), k);
        }
        assert!("beam".parse::<DecoderKind>().is_err());
    }
}
