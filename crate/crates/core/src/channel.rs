//! BPSK modulation and AWGN / Rayleigh channels with reproducible noise.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A deterministic random stream identified by `(seed, stream_id)`.
///
/// Distinct stream ids select independent ChaCha substreams, so frames or
/// workers can each own one without coordination.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream sharing this seed.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    pub fn bit(&mut self) -> u8 {
        (self.rng.next_u32() & 1) as u8
    }

    /// Rayleigh variate with the given scale, by inversion.
    pub fn rayleigh(&mut self, scale: f64) -> f64 {
        let u: f64 = self.uniform();
        scale * (-2.0 * (1.0 - u).ln()).sqrt()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    #[default]
    Awgn,
    Rayleigh,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(Self::Awgn),
            "rayleigh" => Ok(Self::Rayleigh),
            other => Err(Error::InvalidConfig(format!("unknown channel kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Awgn => "awgn",
            Self::Rayleigh => "rayleigh",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub ebn0_db: f64,
    pub rate: f64,
    pub rayleigh_scale: f64,
    /// Raw noise standard deviation, bypassing the Eb/N0 conversion.
    pub sigma_override: Option<f64>,
}

impl ChannelConfig {
    pub fn awgn(ebn0_db: f64, rate: f64) -> Self {
        Self {
            kind: ChannelKind::Awgn,
            ebn0_db,
            rate,
            rayleigh_scale: 1.0,
            sigma_override: None,
        }
    }

    pub fn rayleigh(ebn0_db: f64, rate: f64) -> Self {
        Self {
            kind: ChannelKind::Rayleigh,
            ..Self::awgn(ebn0_db, rate)
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma_override = Some(sigma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rate {} outside (0, 1]",
                self.rate
            )));
        }
        if !self.ebn0_db.is_finite() {
            return Err(Error::InvalidConfig("ebn0_db must be finite".into()));
        }
        if self.kind == ChannelKind::Rayleigh && !(self.rayleigh_scale > 0.0) {
            return Err(Error::InvalidConfig("rayleigh_scale must be positive".into()));
        }
        match self.sigma_override {
            Some(s) if !(s >= 0.0 && s.is_finite()) => Err(Error::InvalidConfig(format!(
                "sigma_override {s} must be finite and nonnegative"
            ))),
            _ => Ok(()),
        }
    }

    /// Noise standard deviation seen by the decoder.
    pub fn sigma(&self) -> Result<f64> {
        self.validate()?;
        match self.sigma_override {
            Some(s) => Ok(s),
            None => ebn0_to_sigma(self.ebn0_db, self.rate),
        }
    }
}

/// `sigma = (2 * rate * 10^(ebn0_db / 10))^(-1/2)`.
pub fn ebn0_to_sigma(ebn0_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidInput(format!("rate {rate} outside (0, 1]")));
    }
    Ok((2.0 * rate * 10f64.powf(ebn0_db / 10.0)).powf(-0.5))
}

/// Maps bit 0 to +1 and bit 1 to -1.
pub fn modulate_bpsk(bits: &[u8]) -> Result<Vec<f64>> {
    bits.iter()
        .map(|&b| match b {
            0 => Ok(1.0),
            1 => Ok(-1.0),
            other => Err(Error::InvalidInput(format!("non-binary value {other}"))),
        })
        .collect()
}

/// Hard decision: `y >= 0` gives bit 0, `y < 0` gives bit 1.
pub fn demodulate_hard(y: &[f64]) -> Result<Vec<u8>> {
    y.iter()
        .map(|&v| {
            if v.is_nan() {
                Err(Error::InvalidInput("NaN in received signal".into()))
            } else {
                Ok(hard_bit(v))
            }
        })
        .collect()
}

#[inline]
pub(crate) fn hard_bit(v: f64) -> u8 {
    u8::from(v < 0.0)
}

/// `+1` for `v >= 0`, `-1` otherwise.
#[inline]
pub(crate) fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Output of one channel use. `fading` is only present for Rayleigh.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub y: Vec<f64>,
    pub fading: Option<Vec<f64>>,
}

/// Passes a bipolar signal through the configured channel.
pub fn transmit(x: &[f64], cfg: &ChannelConfig, rng: &mut RngStream) -> Result<Transmission> {
    let sigma = cfg.sigma()?;
    if let Some(bad) = x.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidInput(format!("signal value {bad} is not +-1")));
    }
    match cfg.kind {
        ChannelKind::Awgn => {
            let y = x.iter().map(|&v| v + sigma * rng.normal()).collect();
            Ok(Transmission { y, fading: None })
        }
        ChannelKind::Rayleigh => {
            let mut y = Vec::with_capacity(x.len());
            let mut h = Vec::with_capacity(x.len());
            for &v in x {
                let gain = rng.rayleigh(cfg.rayleigh_scale);
                y.push(gain * v + sigma * rng.normal());
                h.push(gain);
            }
            Ok(Transmission { y, fading: Some(h) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigma_conversion() {
        assert_abs_diff_eq!(ebn0_to_sigma(4.0, 0.5).unwrap(), 0.630957, epsilon = 1e-5);
        assert_abs_diff_eq!(
            ebn0_to_sigma(0.0, 1.0).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert!(ebn0_to_sigma(4.0, 0.0).is_err());
        assert!(ebn0_to_sigma(4.0, 1.5).is_err());
        let s: Vec<f64> = (0..8).map(|d| ebn0_to_sigma(d as f64, 0.5).unwrap()).collect();
        assert!(s.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn bpsk_mapping() {
        assert_eq!(modulate_bpsk(&[0, 0, 0]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(modulate_bpsk(&[1, 0, 1]).unwrap(), vec![-1.0, 1.0, -1.0]);
        assert!(modulate_bpsk(&[2]).is_err());
        assert_eq!(demodulate_hard(&[0.0]).unwrap(), vec![0]);
        assert_eq!(demodulate_hard(&[-0.3, 2.1]).unwrap(), vec![1, 0]);
        assert!(demodulate_hard(&[f64::NAN]).is_err());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let x = modulate_bpsk(&[0, 1, 1, 0]).unwrap();
        let cfg = ChannelConfig::awgn(4.0, 0.5).with_sigma(0.0);
        let t = transmit(&x, &cfg, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(t.y, x);
        assert!(t.fading.is_none());
    }

    #[test]
    fn awgn_noise_variance() {
        let n = 100_000;
        let x = vec![1.0; n];
        let cfg = ChannelConfig::awgn(0.0, 1.0).with_sigma(0.5);
        let t = transmit(&x, &cfg, &mut RngStream::new(7, 3)).unwrap();
        let noise: Vec<f64> = t.y.iter().zip(&x).map(|(y, x)| y - x).collect();
        let mean = noise.iter().sum::<f64>() / n as f64;
        let var = noise.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // se(mean) = sigma / sqrt(n); se(var) = sigma^2 sqrt(2 / (n - 1)).
        assert!(mean.abs() < 3.0 * 0.5 / (n as f64).sqrt());
        assert!((var - 0.25).abs() < 3.0 * 0.25 * (2.0 / (n - 1) as f64).sqrt(), "{var}");
    }

    #[test]
    fn rayleigh_mean() {
        let n = 100_000;
        let x = vec![1.0; n];
        let cfg = ChannelConfig::rayleigh(4.0, 0.5);
        let t = transmit(&x, &cfg, &mut RngStream::new(11, 0)).unwrap();
        let h = t.fading.unwrap();
        let mean = h.iter().sum::<f64>() / n as f64;
        let expected = (std::f64::consts::PI / 2.0).sqrt();
        // Var[h] = (4 - pi) / 2 for unit scale.
        let se = ((4.0 - std::f64::consts::PI) / 2.0 / n as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let x = vec![1.0; 32];
        let cfg = ChannelConfig::awgn(2.0, 0.5);
        let a = transmit(&x, &cfg, &mut RngStream::new(5, 9)).unwrap();
        let b = transmit(&x, &cfg, &mut RngStream::new(5, 9)).unwrap();
        let c = transmit(&x, &cfg, &mut RngStream::new(5, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.y, c.y);
        assert_eq!(x, vec![1.0; 32]);
    }

    #[test]
    fn invalid_configs() {
        assert!(ChannelConfig::awgn(4.0, 0.0).sigma().is_err());
        assert!(ChannelConfig::awgn(4.0, 0.5).with_sigma(-1.0).sigma().is_err());
        assert!(transmit(&[0.5], &ChannelConfig::awgn(4.0, 0.5), &mut RngStream::new(0, 0)).is_err());
    }
}
