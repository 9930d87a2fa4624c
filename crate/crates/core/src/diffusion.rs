//! Additive forward diffusion `x_t = x_0 + sqrt(cum(t)) * eps` under a
//! constant-increment variance schedule.

use serde::{Deserialize, Serialize};

use crate::channel::RngStream;
use crate::codes::ParityCheckMatrix;
use crate::error::{check_len, Error, Result};

/// Default per-step variance increment for short codes.
pub const DEFAULT_BETA_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub beta_step: f64,
    pub total_steps: usize,
}

impl DiffusionSchedule {
    pub fn new(beta_step: f64, total_steps: usize) -> Result<Self> {
        if !(beta_step > 0.0 && beta_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta_step {beta_step} must be positive")));
        }
        if total_steps == 0 {
            return Err(Error::InvalidConfig("total_steps must be at least 1".into()));
        }
        Ok(Self {
            beta_step,
            total_steps,
        })
    }

    /// `N = (n - k) + 5` steps for the given code.
    pub fn for_code(h: &ParityCheckMatrix, beta_step: f64) -> Result<Self> {
        Self::new(beta_step, default_steps(h))
    }

    /// Cumulative variance at continuous time `t` in `[0, N]`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.total_steps as f64).contains(&t) {
            return Err(Error::InvalidInput(format!(
                "t = {t} outside [0, {}]",
                self.total_steps
            )));
        }
        Ok(t * self.beta_step)
    }

    /// Per-step increment `beta_t` (constant for this schedule).
    pub fn beta(&self, _t: usize) -> f64 {
        self.beta_step
    }

    /// Continuous time at which the cumulative variance equals `variance`.
    pub fn time_for_variance(&self, variance: f64) -> f64 {
        variance / self.beta_step
    }

    /// True when the full schedule injects at least `sigma^2` of noise.
    pub fn covers(&self, sigma: f64) -> bool {
        self.total_steps as f64 * self.beta_step >= sigma * sigma
    }
}

/// `N = n - k + 5`.
pub fn default_steps(h: &ParityCheckMatrix) -> usize {
    h.n() - h.k() + 5
}

/// Free-function form of [`DiffusionSchedule::cumulative`].
pub fn cumulative_variance(schedule: &DiffusionSchedule, t: f64) -> Result<f64> {
    schedule.cumulative(t)
}

/// Two points of one forward trajectory sharing the same noise draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub x_t: Vec<f64>,
    pub x_r: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub t: usize,
    pub r: f64,
}

impl TrajectoryPair {
    pub fn std_t(&self, schedule: &DiffusionSchedule) -> f64 {
        (self.t as f64 * schedule.beta_step).sqrt()
    }

    pub fn std_r(&self, schedule: &DiffusionSchedule) -> f64 {
        (self.r * schedule.beta_step).sqrt()
    }
}

/// Draws `t ~ U{1..N}`.
pub fn sample_step(rng: &mut RngStream, schedule: &DiffusionSchedule) -> usize {
    rng.int_inclusive(1, schedule.total_steps)
}

/// Samples `x_t` and `x_r` (with `r = alpha * t`) from one noise draw.
pub fn sample_pair(
    x0: &[f64],
    t: usize,
    alpha: f64,
    schedule: &DiffusionSchedule,
    rng: &mut RngStream,
) -> Result<TrajectoryPair> {
    let mut eps = vec![0.0; x0.len()];
    rng.fill_normal(&mut eps);
    pair_from_noise(x0, t, alpha, schedule, eps)
}

/// As [`sample_pair`] with an explicit noise vector.
pub fn pair_from_noise(
    x0: &[f64],
    t: usize,
    alpha: f64,
    schedule: &DiffusionSchedule,
    epsilon: Vec<f64>,
) -> Result<TrajectoryPair> {
    check_len("noise", x0.len(), epsilon.len())?;
    if t == 0 || t > schedule.total_steps {
        return Err(Error::InvalidInput(format!(
            "t = {t} outside 1..={}",
            schedule.total_steps
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    let r = alpha * t as f64;
    let std_t = schedule.cumulative(t as f64)?.sqrt();
    let std_r = schedule.cumulative(r)?.sqrt();
    let x_t = x0.iter().zip(&epsilon).map(|(x, e)| x + std_t * e).collect();
    let x_r = x0.iter().zip(&epsilon).map(|(x, e)| x + std_r * e).collect();
    Ok(TrajectoryPair {
        x_t,
        x_r,
        epsilon,
        t,
        r,
    })
}

/// Binary multiplicative-noise target: bit `i` is 1 where `x0[i]` and
/// `x_t[i]` disagree in sign (with `sign(0) = +1`).
pub fn ddecc_target(x0: &[f64], x_t: &[f64]) -> Vec<u8> {
    x0.iter()
        .zip(x_t)
        .map(|(a, b)| u8::from(a * b < 0.0))
        .collect()
}
