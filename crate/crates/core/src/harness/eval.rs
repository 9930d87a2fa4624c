//! Monte-Carlo BER/FER evaluation with an error-count stopping rule.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{modulate_bpsk, transmit, ChannelConfig, RngStream};
use crate::codes::Code;
use crate::decoders::Decoder;
use crate::error::{Error, Result};
use crate::trainer::MIN_SYNDROME_SIGMA;

/// Salt separating decoder-side randomness from channel randomness.
const DECODER_STREAM_SALT: u64 = 0x5eed_dec0_de00_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRule {
    pub min_frame_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            min_frame_errors: 500,
            max_frames: 10_000_000,
        }
    }
}

impl StopRule {
    pub fn frames(n: u64) -> Self {
        Self {
            min_frame_errors: u64::MAX,
            max_frames: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_frame_errors == 0 || self.max_frames == 0 {
            return Err(Error::InvalidConfig("stop rule values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub workers: usize,
    /// Frames decoded per batch call.
    pub chunk: usize,
    /// Transmit the all-zero codeword instead of random codewords.
    pub zero_codeword: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            chunk: 256,
            zero_codeword: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    /// Absent when no bit errors were seen.
    pub neg_ln_ber: Option<f64>,
    pub wall_time: f64,
    pub throughput: f64,
    pub decoder_id: String,
    pub code_id: String,
    pub channel: String,
    pub seed: u64,
}

impl EvalResult {
    fn from_counts(frames: u64, bit_errors: u64, frame_errors: u64, n: usize) -> (f64, f64, Option<f64>) {
        let ber = bit_errors as f64 / (frames as f64 * n as f64);
        let fer = frame_errors as f64 / frames as f64;
        let neg = (bit_errors > 0).then(|| -ber.ln());
        (ber, fer, neg)
    }
}

pub fn describe_channel(cfg: &ChannelConfig) -> String {
    let sigma = cfg.sigma().map(|s| format!("{s:.6}")).unwrap_or_else(|_| "?".into());
    format!("{} ebn0={} dB sigma={sigma}", cfg.kind, cfg.ebn0_db)
}

/// One simulated frame.
pub struct Frame {
    pub bits: Vec<u8>,
    pub y: Vec<f64>,
}

/// Deterministic frame `index` of a run.
pub fn frame(code: &Code, channel: &ChannelConfig, seed: u64, index: u64, zero_codeword: bool) -> Result<Frame> {
    let mut rng = RngStream::new(seed, index);
    let bits = if zero_codeword {
        vec![0u8; code.n()]
    } else {
        let msg: Vec<u8> = (0..code.k()).map(|_| rng.bit()).collect();
        code.g.encode(&msg)?.bits
    };
    let y = transmit(&modulate_bpsk(&bits)?, channel, &mut rng)?.y;
    Ok(Frame { bits, y })
}

pub(crate) fn decoder_rng(seed: u64, index: u64) -> RngStream {
    RngStream::new(seed ^ DECODER_STREAM_SALT, index)
}

/// Noise std handed to decoders; floored so a noiseless channel stays usable.
pub(crate) fn decoder_sigma(channel: &ChannelConfig) -> Result<f64> {
    Ok(channel.sigma()?.max(MIN_SYNDROME_SIGMA))
}

/// Bit errors of each frame in `start..end`.
fn chunk_errors(
    decoder: &dyn Decoder,
    code: &Code,
    channel: &ChannelConfig,
    seed: u64,
    start: u64,
    end: u64,
    zero_codeword: bool,
) -> Result<Vec<u32>> {
    let sigma = decoder_sigma(channel)?;
    let frames: Vec<Frame> = (start..end)
        .map(|i| frame(code, channel, seed, i, zero_codeword))
        .collect::<Result<_>>()?;
    let ys: Vec<Vec<f64>> = frames.iter().map(|f| f.y.clone()).collect();
    let mut rngs: Vec<RngStream> = (start..end).map(|i| decoder_rng(seed, i)).collect();
    let outs = decoder.decode_batch(&ys, sigma, &mut rngs)?;
    Ok(frames
        .iter()
        .zip(&outs)
        .map(|(f, o)| f.bits.iter().zip(&o.bits).filter(|(a, b)| a != b).count() as u32)
        .collect())
}

/// Decodes frames until `stop.min_frame_errors` frame errors have been seen
/// (the run ends exactly at that frame) or `stop.max_frames` is reached.
///
/// Frames are generated and decoded in chunks that may run on several
/// workers, then reduced in frame order, so counts do not depend on the
/// worker count.
pub fn run_eval(
    decoder: &dyn Decoder,
    code: &Code,
    channel: &ChannelConfig,
    stop: &StopRule,
    seed: u64,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    stop.validate()?;
    channel.validate()?;
    if opts.workers == 0 || opts.chunk == 0 {
        return Err(Error::InvalidConfig("workers and chunk must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let n = code.n();
    let (mut frames, mut bit_errors, mut frame_errors) = (0u64, 0u64, 0u64);
    let started = Instant::now();
    let group = (opts.workers * opts.chunk) as u64;

    'outer: while frames < stop.max_frames {
        let start = frames;
        let end = (start + group).min(stop.max_frames);
        let bounds: Vec<(u64, u64)> = (start..end)
            .step_by(opts.chunk)
            .map(|s| (s, (s + opts.chunk as u64).min(end)))
            .collect();
        let results: Vec<Result<Vec<u32>>> = pool.install(|| {
            bounds
                .par_iter()
                .map(|&(s, e)| chunk_errors(decoder, code, channel, seed, s, e, opts.zero_codeword))
                .collect()
        });
        for r in results {
            let errs = r.map_err(|e| Error::Decode {
                frames,
                msg: format!("{e}; partial counts: bit_errors={bit_errors} frame_errors={frame_errors}"),
            })?;
            for e in errs {
                frames += 1;
                bit_errors += u64::from(e);
                frame_errors += u64::from(e > 0);
                if frame_errors >= stop.min_frame_errors {
                    break 'outer;
                }
            }
        }
    }

    let wall_time = started.elapsed().as_secs_f64();
    let (ber, fer, neg_ln_ber) = EvalResult::from_counts(frames, bit_errors, frame_errors, n);
    Ok(EvalResult {
        frames,
        bit_errors,
        frame_errors,
        ber,
        fer,
        neg_ln_ber,
        wall_time,
        throughput: frames as f64 / wall_time.max(1e-12),
        decoder_id: decoder.id(),
        code_id: code.name.clone(),
        channel: describe_channel(channel),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{DecodeOutcome, UncodedDecoder};

    /// Knows the transmitted word by regenerating the frame.
    struct Oracle {
        code: Code,
        channel: ChannelConfig,
        seed: u64,
        flip: bool,
    }

    impl Decoder for Oracle {
        fn id(&self) -> String {
            "oracle".into()
        }

        fn decode(&self, _y: &[f64], _sigma: f64, rng: &mut RngStream) -> Result<DecodeOutcome> {
            let i = rng.stream_id();
            let mut bits = frame(&self.code, &self.channel, self.seed, i, false)?.bits;
            if self.flip {
                bits[0] ^= 1;
            }
            Ok(DecodeOutcome {
                bits,
                steps_used: 0,
                converged: true,
                per_step_trace: None,
            })
        }
    }

    fn oracle(flip: bool) -> Oracle {
        let code = Code::builtin("hamming74").unwrap();
        Oracle {
            channel: ChannelConfig::awgn(2.0, code.rate()),
            code,
            seed: 9,
            flip,
        }
    }

    #[test]
    fn perfect_decoder_runs_to_max_frames() {
        let o = oracle(false);
        let r = run_eval(&o, &o.code, &o.channel, &StopRule { min_frame_errors: 5, max_frames: 1000 }, 9, &EvalOptions::default()).unwrap();
        assert_eq!((r.frames, r.bit_errors, r.frame_errors), (1000, 0, 0));
        assert_eq!(r.ber, 0.0);
        assert_eq!(r.neg_ln_ber, None);
    }

    #[test]
    fn one_flip_per_frame() {
        let o = oracle(true);
        let r = run_eval(&o, &o.code, &o.channel, &StopRule::frames(100), 9, &EvalOptions::default()).unwrap();
        assert_eq!(r.frames, 100);
        assert!((r.ber - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(r.fer, 1.0);
    }

    #[test]
    fn neg_ln_identity() {
        let (ber, fer, neg) = EvalResult::from_counts(100, 1, 1, 1);
        assert_eq!((ber, fer), (0.01, 0.01));
        assert!((neg.unwrap() - 100f64.ln()).abs() < 1e-12);
        let ber = (-5.0f64).exp();
        assert!((-ber.ln() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn stops_exactly_at_error_target_for_any_worker_count() {
        let code = Code::builtin("hamming74").unwrap();
        let ch = ChannelConfig::awgn(1.0, code.rate());
        let dec = UncodedDecoder { h: code.h.clone() };
        let stop = StopRule { min_frame_errors: 37, max_frames: 100_000 };
        let runs: Vec<EvalResult> = [(1, 256), (1, 7), (3, 5)]
            .iter()
            .map(|&(workers, chunk)| {
                let opts = EvalOptions { workers, chunk, zero_codeword: false };
                run_eval(&dec, &code, &ch, &stop, 4, &opts).unwrap()
            })
            .collect();
        for r in &runs {
            assert_eq!(r.frame_errors, 37);
            assert_eq!((r.frames, r.bit_errors), (runs[0].frames, runs[0].bit_errors));
        }
        // The last frame is the one that reached the target.
        let mut seen = 0;
        for i in 0..runs[0].frames {
            let f = frame(&code, &ch, 4, i, false).unwrap();
            let hard: Vec<u8> = f.y.iter().map(|&v| u8::from(v < 0.0)).collect();
            seen += u64::from(hard != f.bits);
        }
        assert_eq!(seen, 37);
    }
}
