//! Decoders driven by the trained network.

use ndarray::Array2;

use super::{e_hard, DecodeOutcome, Decoder, TracePoint};
use crate::backbone::ops::sigmoid;
use crate::backbone::{preprocess, InputBatch, ModelParams, Network, OutputHead};
use crate::channel::{hard_bit, modulate_bpsk, sign, RngStream};
use crate::codes::ParityCheckMatrix;
use crate::diffusion::DiffusionSchedule;
use crate::error::{check_len, Error, Result};
use crate::syndrome::soft_condition_clamped;
use crate::trainer::{condition_of, hard_decision, ConditionKind, MIN_SYNDROME_SIGMA};

/// Anything that maps received words to per-bit sigmoid outputs.
pub trait BitModel: Send + Sync {
    fn n(&self) -> usize;

    /// One row of probabilities per word; `sigmas[r]` is the noise std the
    /// condition of word `r` is computed with.
    fn probabilities(&self, ys: &[&[f64]], sigmas: &[f64]) -> Result<Array2<f64>>;
}

/// Trained parameters bound to a code and a condition kind.
#[derive(Debug, Clone)]
pub struct NeuralModel {
    params: ModelParams,
    network: Network,
    h: ParityCheckMatrix,
    condition: ConditionKind,
}

impl NeuralModel {
    pub fn new(params: ModelParams, h: &ParityCheckMatrix, condition: ConditionKind) -> Result<Self> {
        params.validate()?;
        check_len("model code length", h.n(), params.config.n)?;
        check_len("model check count", h.m(), params.config.m)?;
        Ok(Self {
            network: Network::new(params.config),
            params,
            h: h.clone(),
            condition,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn head(&self) -> OutputHead {
        self.params.config.head
    }

    pub fn condition_kind(&self) -> ConditionKind {
        self.condition
    }
}

impl BitModel for NeuralModel {
    fn n(&self) -> usize {
        self.h.n()
    }

    fn probabilities(&self, ys: &[&[f64]], sigmas: &[f64]) -> Result<Array2<f64>> {
        check_len("sigmas", ys.len(), sigmas.len())?;
        let mut batch = InputBatch::with_capacity(ys.len(), self.h.n(), self.h.m());
        for (r, (y, &s)) in ys.iter().zip(sigmas).enumerate() {
            let input = preprocess(y, &self.h)?.with_condition(condition_of(self.condition, y, &self.h, s)?);
            batch.set_row(r, &input)?;
        }
        Ok(self.network.forward(&self.params.values, &batch)?.mapv(sigmoid))
    }
}

/// Batched one-step decoding.
pub fn decode_one_step_batch<M: BitModel + ?Sized>(
    model: &M,
    ys: &[&[f64]],
    h: &ParityCheckMatrix,
    sigmas: &[f64],
) -> Result<Vec<DecodeOutcome>> {
    check_len("model code length", h.n(), model.n())?;
    if ys.is_empty() {
        return Ok(Vec::new());
    }
    let probs = model.probabilities(ys, sigmas)?;
    Ok(probs
        .rows()
        .into_iter()
        .map(|row| DecodeOutcome::new(hard_decision(&row.to_vec()), 1, h))
        .collect())
}

/// `x0 ≈ f(y, e_soft(y))`, thresholded at 0.5.
pub fn decode_one_step<M: BitModel + ?Sized>(
    model: &M,
    y: &[f64],
    h: &ParityCheckMatrix,
    sigma: f64,
) -> Result<DecodeOutcome> {
    Ok(decode_one_step_batch(model, &[y], h, &[sigma])?.remove(0))
}

/// Repeats one-step decoding on the re-modulated estimate with fresh noise of
/// variance `cum(renoise_fraction * N)`.
#[allow(clippy::too_many_arguments)]
pub fn decode_multi_step<M: BitModel + ?Sized>(
    model: &M,
    y: &[f64],
    h: &ParityCheckMatrix,
    sigma: f64,
    n_steps: usize,
    renoise_fraction: f64,
    schedule: &DiffusionSchedule,
    rng: &mut RngStream,
) -> Result<DecodeOutcome> {
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&renoise_fraction) {
        return Err(Error::InvalidInput(format!(
            "renoise fraction {renoise_fraction} outside [0, 1]"
        )));
    }
    let mut out = decode_one_step(model, y, h, sigma)?;
    let var = schedule.cumulative(renoise_fraction * schedule.total_steps as f64)?;
    let std = var.sqrt();
    for _ in 1..n_steps {
        let mut x = modulate_bpsk(&out.bits)?;
        for v in &mut x {
            *v += std * rng.normal();
        }
        out = decode_one_step(model, &x, h, std.max(MIN_SYNDROME_SIGMA))?;
    }
    out.steps_used = n_steps;
    Ok(out)
}

/// Reverse-step coefficient `sqrt(cum_t) * beta / (cum_t + beta)`.
pub fn ddecc_coefficient(schedule: &DiffusionSchedule, t: usize) -> f64 {
    let cum = t as f64 * schedule.beta_step;
    let beta = schedule.beta(t);
    cum.sqrt() * beta / (cum + beta)
}

/// Iterative denoising of a batch of words. The model predicts per-bit flip
/// probabilities, conditioned on `e_hard` of the current iterate.
pub fn decode_ddecc_batch<M: BitModel + ?Sized>(
    model: &M,
    ys: &[&[f64]],
    h: &ParityCheckMatrix,
    sigma: f64,
    max_steps: usize,
    schedule: &DiffusionSchedule,
    trace: bool,
) -> Result<Vec<DecodeOutcome>> {
    if max_steps == 0 {
        return Err(Error::InvalidInput("max_steps must be at least 1".into()));
    }
    check_len("model code length", h.n(), model.n())?;
    let mut xs: Vec<Vec<f64>> = ys.iter().map(|y| y.to_vec()).collect();
    for x in &xs {
        check_len("received signal", h.n(), x.len())?;
    }
    let mut errs: Vec<usize> = xs.iter().map(|x| e_hard(x, h)).collect();
    let mut steps = vec![0usize; xs.len()];
    let mut traces: Vec<Vec<TracePoint>> = vec![Vec::new(); xs.len()];
    let n_max = schedule.total_steps;

    for _ in 0..max_steps {
        let active: Vec<usize> = (0..xs.len()).filter(|&i| errs[i] != 0).collect();
        if active.is_empty() {
            break;
        }
        let views: Vec<&[f64]> = active.iter().map(|&i| xs[i].as_slice()).collect();
        let probs = model.probabilities(&views, &vec![sigma; active.len()])?;
        for (row, &i) in active.iter().enumerate() {
            let t = errs[i].clamp(1, n_max);
            let c = ddecc_coefficient(schedule, t);
            for (j, v) in xs[i].iter_mut().enumerate() {
                let eps = 1.0 - 2.0 * probs[[row, j]];
                *v -= c * (*v - sign(*v) * eps);
            }
            steps[i] += 1;
            errs[i] = e_hard(&xs[i], h);
            if trace {
                traces[i].push(TracePoint {
                    e_hard: errs[i],
                    e_soft: soft_condition_clamped(&xs[i], h, sigma)?,
                });
            }
        }
    }

    Ok(xs
        .into_iter()
        .zip(steps)
        .zip(traces)
        .map(|((x, s), tr)| {
            let mut out = DecodeOutcome::new(x.iter().map(|&v| hard_bit(v)).collect(), s, h);
            if trace {
                out.per_step_trace = Some(tr);
            }
            out
        })
        .collect())
}

pub fn decode_ddecc<M: BitModel + ?Sized>(
    model: &M,
    y: &[f64],
    h: &ParityCheckMatrix,
    sigma: f64,
    max_steps: usize,
    schedule: &DiffusionSchedule,
    trace: bool,
) -> Result<DecodeOutcome> {
    Ok(decode_ddecc_batch(model, &[y], h, sigma, max_steps, schedule, trace)?.remove(0))
}

fn views(ys: &[Vec<f64>]) -> Vec<&[f64]> {
    ys.iter().map(Vec::as_slice).collect()
}

pub struct OneStepDecoder<M> {
    pub model: M,
    pub h: ParityCheckMatrix,
}

impl<M: BitModel> Decoder for OneStepDecoder<M> {
    fn id(&self) -> String {
        "eccfm".into()
    }

    fn decode(&self, y: &[f64], sigma: f64, _rng: &mut RngStream) -> Result<DecodeOutcome> {
        decode_one_step(&self.model, y, &self.h, sigma)
    }

    fn decode_batch(
        &self,
        ys: &[Vec<f64>],
        sigma: f64,
        _rngs: &mut [RngStream],
    ) -> Result<Vec<DecodeOutcome>> {
        decode_one_step_batch(&self.model, &views(ys), &self.h, &vec![sigma; ys.len()])
    }
}

pub struct MultiStepDecoder<M> {
    pub model: M,
    pub h: ParityCheckMatrix,
    pub schedule: DiffusionSchedule,
    pub n_steps: usize,
    pub renoise_fraction: f64,
}

impl<M: BitModel> Decoder for MultiStepDecoder<M> {
    fn id(&self) -> String {
        format!("eccfm_{}step", self.n_steps)
    }

    fn decode(&self, y: &[f64], sigma: f64, rng: &mut RngStream) -> Result<DecodeOutcome> {
        decode_multi_step(
            &self.model,
            y,
            &self.h,
            sigma,
            self.n_steps,
            self.renoise_fraction,
            &self.schedule,
            rng,
        )
    }
}

pub struct DdeccDecoder<M> {
    pub model: M,
    pub h: ParityCheckMatrix,
    pub schedule: DiffusionSchedule,
    pub max_steps: usize,
    pub trace: bool,
}

impl<M: BitModel> DdeccDecoder<M> {
    /// `max_steps = 2N`.
    pub fn new(model: M, h: ParityCheckMatrix, schedule: DiffusionSchedule) -> Self {
        Self {
            model,
            h,
            max_steps: 2 * schedule.total_steps,
            schedule,
            trace: false,
        }
    }
}

impl<M: BitModel> Decoder for DdeccDecoder<M> {
    fn id(&self) -> String {
        "ddecc".into()
    }

    fn decode(&self, y: &[f64], sigma: f64, _rng: &mut RngStream) -> Result<DecodeOutcome> {
        decode_ddecc(&self.model, y, &self.h, sigma, self.max_steps, &self.schedule, self.trace)
    }

    fn decode_batch(
        &self,
        ys: &[Vec<f64>],
        sigma: f64,
        _rngs: &mut [RngStream],
    ) -> Result<Vec<DecodeOutcome>> {
        decode_ddecc_batch(
            &self.model,
            &views(ys),
            &self.h,
            sigma,
            self.max_steps,
            &self.schedule,
            self.trace,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::{BackboneConfig, BackboneKind};
    use crate::codes::{derive_generator, hamming74};

    /// Returns the same probability row for every input.
    struct Constant(Vec<f64>);

    impl BitModel for Constant {
        fn n(&self) -> usize {
            self.0.len()
        }

        fn probabilities(&self, ys: &[&[f64]], _sigmas: &[f64]) -> Result<Array2<f64>> {
            let mut out = Array2::zeros((ys.len(), self.0.len()));
            for mut row in out.rows_mut() {
                for (d, &p) in row.iter_mut().zip(&self.0) {
                    *d = p;
                }
            }
            Ok(out)
        }
    }

    fn schedule() -> DiffusionSchedule {
        DiffusionSchedule::for_code(&hamming74(), 0.01).unwrap()
    }

    #[test]
    fn one_step_plumbing_identity() {
        let h = hamming74();
        let c = derive_generator(&h).unwrap().encode_index(13);
        let model = Constant(c.bits.iter().map(|&b| f64::from(b)).collect());
        let out = decode_one_step(&model, &[0.3; 7], &h, 1.0).unwrap();
        assert_eq!(out.bits, c.bits);
        assert!(out.converged);
        assert_eq!(out.steps_used, 1);
        let tie = decode_one_step(&Constant(vec![0.5; 7]), &[0.3; 7], &h, 1.0).unwrap();
        assert_eq!(tie.bits, vec![0; 7]);
    }

    #[test]
    fn multi_step_degenerate_cases() {
        let h = hamming74();
        let p = ModelParams::init(BackboneConfig::for_code(BackboneKind::Mlp, &h), 4).unwrap();
        let model = NeuralModel::new(p, &h, ConditionKind::Soft).unwrap();
        let y = [0.8, -0.3, 1.1, 0.2, -1.0, 0.9, 0.4];
        let mut rng = RngStream::new(1, 1);
        let untouched = rng.clone();
        let one = decode_one_step(&model, &y, &h, 0.6).unwrap();
        let multi = decode_multi_step(&model, &y, &h, 0.6, 1, 0.2, &schedule(), &mut rng).unwrap();
        assert_eq!(one, multi);
        assert_eq!(rng.normal(), untouched.clone().normal());

        let two = decode_multi_step(&model, &y, &h, 0.6, 2, 0.0, &schedule(), &mut rng).unwrap();
        let x = modulate_bpsk(&one.bits).unwrap();
        let again = decode_one_step(&model, &x, &h, MIN_SYNDROME_SIGMA).unwrap();
        assert_eq!(two.bits, again.bits);
        assert_eq!(two.steps_used, 2);
        assert!(decode_multi_step(&model, &y, &h, 0.6, 2, 1.5, &schedule(), &mut rng).is_err());
        assert!(decode_multi_step(&model, &y, &h, 0.6, 0, 0.2, &schedule(), &mut rng).is_err());
    }

    #[test]
    fn coefficient_example() {
        assert!((ddecc_coefficient(&schedule(), 5) - 0.037268).abs() < 1e-6);
        let direct = 0.05f64.sqrt() * 0.01 / 0.06;
        assert!((ddecc_coefficient(&schedule(), 5) - direct).abs() < 1e-15);
    }

    #[test]
    fn ddecc_valid_input_exits_immediately() {
        let h = hamming74();
        let c = derive_generator(&h).unwrap().encode_index(6);
        let y = modulate_bpsk(&c.bits).unwrap();
        let out = decode_ddecc(&Constant(vec![0.9; 7]), &y, &h, 0.5, 16, &schedule(), true).unwrap();
        assert_eq!(out.steps_used, 0);
        assert!(out.converged);
        assert_eq!(out.bits, c.bits);
        assert_eq!(out.per_step_trace, Some(vec![]));
    }

    #[test]
    fn ddecc_no_noise_mock_runs_out_of_steps() {
        let h = hamming74();
        let y = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -0.4];
        let out = decode_ddecc(&Constant(vec![0.0; 7]), &y, &h, 0.5, 10, &schedule(), true).unwrap();
        assert_eq!(out.steps_used, 10);
        assert!(!out.converged);
        assert_eq!(out.bits, vec![0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(out.per_step_trace.unwrap().len(), 10);
        assert!(decode_ddecc(&Constant(vec![0.0; 7]), &y, &h, 0.5, 0, &schedule(), false).is_err());
    }

    #[test]
    fn ddecc_flip_mock_repairs_the_flipped_bit() {
        // Predicts a flip only at the last position.
        let h = hamming74();
        let mut p = vec![0.0; 7];
        p[6] = 1.0;
        let y = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -0.4];
        let out = decode_ddecc(&Constant(p), &y, &h, 0.5, 40, &schedule(), true).unwrap();
        assert!(out.converged);
        assert_eq!(out.bits, vec![0; 7]);
        let tr = out.per_step_trace.unwrap();
        assert_eq!(tr.len(), out.steps_used);
        assert_eq!(tr.last().unwrap().e_hard, 0);
    }

    #[test]
    fn batch_matches_single() {
        let h = hamming74();
        let cfg = BackboneConfig::for_code(BackboneKind::Mlp, &h).with_head(OutputHead::Noise);
        let model = NeuralModel::new(ModelParams::init(cfg, 2).unwrap(), &h, ConditionKind::Hard).unwrap();
        let mut rng = RngStream::new(4, 0);
        let ys: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..7).map(|_| 1.0 + 0.7 * rng.normal()).collect())
            .collect();
        let dec = DdeccDecoder::new(model, h.clone(), schedule());
        let mut rngs: Vec<RngStream> = (0..12).map(|i| RngStream::new(0, i)).collect();
        let batch = dec.decode_batch(&ys, 0.7, &mut rngs).unwrap();
        for (y, b) in ys.iter().zip(&batch) {
            assert_eq!(&dec.decode(y, 0.7, &mut rngs[0]).unwrap(), b);
        }
    }
}
