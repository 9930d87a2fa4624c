//! Per-step decoding trajectories.

use serde::{Deserialize, Serialize};

use crate::channel::RngStream;
use crate::decoders::Decoder;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sample_id: usize,
    pub step: usize,
    pub e_hard: usize,
    pub e_soft: f64,
}

/// Decodes each word with a tracing decoder and flattens the traces.
pub fn trace_trajectory(decoder: &dyn Decoder, ys: &[Vec<f64>], sigma: f64, seed: u64) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for (id, y) in ys.iter().enumerate() {
        let mut rng = RngStream::new(seed, id as u64);
        let out = decoder.decode(y, sigma, &mut rng)?;
        let trace = out.per_step_trace.ok_or_else(|| {
            Error::InvalidConfig(format!("decoder {} does not record traces", decoder.id()))
        })?;
        rows.extend(trace.iter().enumerate().map(|(k, p)| TraceRow {
            sample_id: id,
            step: k + 1,
            e_hard: p.e_hard,
            e_soft: p.e_soft,
        }));
    }
    Ok(rows)
}

/// Comma-separated rendering with a header line.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("sample_id,step,e_hard,e_soft\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{:.9}\n", r.sample_id, r.step, r.e_hard, r.e_soft));
    }
    s
}

/// Largest absolute first difference within each sample's series, for
/// `e_soft` and for `e_hard / m`.
pub fn max_step_changes(rows: &[TraceRow], m: usize) -> (f64, f64) {
    let mut soft: f64 = 0.0;
    let mut hard: f64 = 0.0;
    for w in rows.windows(2) {
        if w[0].sample_id == w[1].sample_id {
            soft = soft.max((w[1].e_soft - w[0].e_soft).abs());
            hard = hard.max((w[1].e_hard as f64 - w[0].e_hard as f64).abs() / m as f64);
        }
    }
    (soft, hard)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        let rows = vec![
            TraceRow { sample_id: 0, step: 1, e_hard: 2, e_soft: 0.5 },
            TraceRow { sample_id: 0, step: 2, e_hard: 0, e_soft: 0.1 },
            TraceRow { sample_id: 1, step: 1, e_hard: 3, e_soft: 0.9 },
        ];
        let csv = trace_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 4));
        let (soft, hard) = max_step_changes(&rows, 3);
        assert!((soft - 0.4).abs() < 1e-12);
        assert!((hard - 2.0 / 3.0).abs() < 1e-12);
    }

    /// Flip probability 1 exactly where the sign disagrees with the all-zero word.
    struct ZeroWordOracle;

    impl crate::decoders::BitModel for ZeroWordOracle {
        fn n(&self) -> usize {
            7
        }

        fn probabilities(&self, ys: &[&[f64]], _sigmas: &[f64]) -> Result<ndarray::Array2<f64>> {
            Ok(ndarray::Array2::from_shape_fn((ys.len(), 7), |(r, i)| f64::from(u8::from(ys[r][i] < 0.0))))
        }
    }

    #[test]
    fn converged_traces_end_at_zero_and_count_steps() {
        use crate::decoders::DdeccDecoder;
        use crate::diffusion::DiffusionSchedule;
        let code = crate::codes::Code::builtin("hamming74").unwrap();
        let sched = DiffusionSchedule::for_code(&code.h, 0.07).unwrap();
        let mut dec = DdeccDecoder::new(ZeroWordOracle, code.h.clone(), sched);
        dec.trace = true;
        let ys = vec![
            vec![1.0, -0.8, 1.0, 1.0, 0.9, 1.1, 1.0],
            vec![0.7, 1.0, 1.0, -0.3, 1.0, -0.6, 1.0],
            vec![1.0; 7],
        ];
        let rows = trace_trajectory(&dec, &ys, 0.6, 0).unwrap();
        let mut total = 0;
        for (id, y) in ys.iter().enumerate() {
            let out = dec.decode(y, 0.6, &mut RngStream::new(0, id as u64)).unwrap();
            assert!(out.converged);
            total += out.steps_used;
            let mine: Vec<&TraceRow> = rows.iter().filter(|r| r.sample_id == id).collect();
            assert_eq!(mine.len(), out.steps_used);
            if let Some(last) = mine.last() {
                assert_eq!(last.e_hard, 0);
            }
        }
        assert_eq!(rows.len(), total);
        assert!(total > 0);
    }
}
