//! Throughput benchmarking and step-count statistics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::{decoder_rng, decoder_sigma, frame};
use crate::channel::{ChannelConfig, RngStream};
use crate::codes::Code;
use crate::decoders::Decoder;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub decoder_id: String,
    pub frames: u64,
    pub batch_size: usize,
    pub wall_time: f64,
    pub throughput: f64,
    /// Throughput relative to the first decoder of the table.
    pub speedup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchOptions {
    pub frames: u64,
    pub warmup_frames: u64,
    pub batch_size: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            frames: 10_000,
            warmup_frames: 256,
            batch_size: 256,
        }
    }
}

/// Times every decoder on the same pre-generated frames. Frame generation
/// and warmup are excluded from the timed region.
pub fn run_benchmark(
    decoders: &[&dyn Decoder],
    code: &Code,
    channel: &ChannelConfig,
    opts: &BenchOptions,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if opts.frames == 0 || opts.batch_size == 0 {
        return Err(Error::InvalidConfig("bench frames and batch_size must be positive".into()));
    }
    let sigma = decoder_sigma(channel)?;
    let total = opts.frames + opts.warmup_frames;
    let ys: Vec<Vec<f64>> = (0..total)
        .map(|i| frame(code, channel, seed, i, false).map(|f| f.y))
        .collect::<Result<_>>()?;
    let (warm, timed) = ys.split_at(opts.warmup_frames as usize);

    let mut rows: Vec<BenchRow> = Vec::with_capacity(decoders.len());
    for dec in decoders {
        let mut rngs: Vec<RngStream> = (0..total).map(|i| decoder_rng(seed, i)).collect();
        let (warm_rngs, timed_rngs) = rngs.split_at_mut(opts.warmup_frames as usize);
        for (ys, r) in warm.chunks(opts.batch_size).zip(warm_rngs.chunks_mut(opts.batch_size)) {
            dec.decode_batch(ys, sigma, r)?;
        }
        let started = Instant::now();
        for (ys, r) in timed.chunks(opts.batch_size).zip(timed_rngs.chunks_mut(opts.batch_size)) {
            dec.decode_batch(ys, sigma, r)?;
        }
        let wall_time = started.elapsed().as_secs_f64();
        let throughput = opts.frames as f64 / wall_time.max(1e-12);
        let speedup = rows.first().map_or(1.0, |first| throughput / first.throughput);
        rows.push(BenchRow {
            decoder_id: dec.id(),
            frames: opts.frames,
            batch_size: opts.batch_size,
            wall_time,
            throughput,
            speedup,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub ebn0_db: f64,
    pub frames: u64,
    pub mean_steps: f64,
    pub variance: f64,
    /// Frames that hit the step limit without a zero syndrome; they count at
    /// the step limit in the mean.
    pub non_converged: u64,
}

/// Mean and variance of `steps_used` per channel setting.
pub fn run_convergence_stats(
    decoder: &dyn Decoder,
    code: &Code,
    channels: &[ChannelConfig],
    frames: u64,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    if frames == 0 {
        return Err(Error::InvalidConfig("frames must be positive".into()));
    }
    channels
        .iter()
        .map(|ch| {
            let sigma = decoder_sigma(ch)?;
            let ys: Vec<Vec<f64>> = (0..frames)
                .map(|i| frame(code, ch, seed, i, false).map(|f| f.y))
                .collect::<Result<_>>()?;
            let mut rngs: Vec<RngStream> = (0..frames).map(|i| decoder_rng(seed, i)).collect();
            let outs = decoder.decode_batch(&ys, sigma, &mut rngs)?;
            let steps: Vec<f64> = outs.iter().map(|o| o.steps_used as f64).collect();
            let mean = steps.iter().sum::<f64>() / frames as f64;
            let variance = steps.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / frames as f64;
            Ok(ConvergenceRow {
                ebn0_db: ch.ebn0_db,
                frames,
                mean_steps: mean,
                variance,
                non_converged: outs.iter().filter(|o| !o.converged).count() as u64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{BpDecoder, UncodedDecoder};

    #[test]
    fn identical_decoders_have_similar_throughput() {
        let code = Code::builtin("hamming74").unwrap();
        let ch = ChannelConfig::awgn(4.0, code.rate());
        let a = BpDecoder::new(code.h.clone(), 10).unwrap();
        let b = a.clone();
        let opts = BenchOptions {
            frames: 20_000,
            warmup_frames: 1000,
            batch_size: 256,
        };
        // Timing noise on a shared machine: take the best of a few tries.
        let best = (0..3)
            .map(|_| {
                let rows = run_benchmark(&[&a, &b], &code, &ch, &opts, 1).unwrap();
                assert_eq!(rows[0].speedup, 1.0);
                rows[1].speedup
            })
            .min_by(|x, y| (x - 1.0).abs().total_cmp(&(y - 1.0).abs()))
            .unwrap();
        assert!((best - 1.0).abs() < 0.2, "ratio {best}");
        assert!(run_benchmark(&[&a], &code, &ch, &BenchOptions { frames: 0, ..opts }, 1).is_err());
    }

    #[test]
    fn noiseless_channel_needs_no_steps() {
        let code = Code::builtin("hamming74").unwrap();
        let ch = ChannelConfig::awgn(4.0, code.rate()).with_sigma(0.0);
        let dec = BpDecoder::new(code.h.clone(), 10).unwrap();
        let rows = run_convergence_stats(&dec, &code, &[ch], 200, 3).unwrap();
        assert_eq!((rows[0].mean_steps, rows[0].variance, rows[0].non_converged), (0.0, 0.0, 0));
        let unc = UncodedDecoder { h: code.h.clone() };
        let noisy = ChannelConfig::awgn(0.0, code.rate());
        let rows = run_convergence_stats(&unc, &code, &[noisy], 500, 3).unwrap();
        assert!(rows[0].non_converged > 0);
    }
}
