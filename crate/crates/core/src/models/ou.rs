use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStreamSpec;
use crate::trajectory::TrajectoryGrid;

/// Ornstein-Uhlenbeck `dX = -reversion (X - mean) dt + noise dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OUParams {
    pub mean: f64,
    pub reversion: f64,
    pub noise: f64,
}

impl OUParams {
    pub fn new(mean: f64, reversion: f64, noise: f64) -> Result<Self> {
        let p = Self {
            mean,
            reversion,
            noise,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.check(false)
    }

    fn check(&self, allow_zero_noise: bool) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::ParameterDomain(format!("OU mean {}", self.mean)));
        }
        if !(self.reversion > 0.0 && self.reversion.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "OU reversion must be positive, got {}",
                self.reversion
            )));
        }
        let noise_ok = if allow_zero_noise {
            self.noise >= 0.0
        } else {
            self.noise > 0.0
        };
        if !(noise_ok && self.noise.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "OU noise must be positive, got {}",
                self.noise
            )));
        }
        Ok(())
    }

    /// Stationary variance `noise^2 / (2 reversion)`.
    pub fn stationary_variance(&self) -> f64 {
        self.noise * self.noise / (2.0 * self.reversion)
    }

    /// `L^4` norm of the stationary marginal.
    pub fn l4_norm(&self) -> f64 {
        let v = self.stationary_variance();
        let m2 = self.mean * self.mean;
        (m2 * m2 + 6.0 * m2 * v + 3.0 * v * v).powf(0.25)
    }

    /// Largest `|K'(u)|` on `u >= 0`, the Lipschitz constant of the covariance.
    pub fn covariance_lipschitz(&self) -> f64 {
        self.stationary_variance() * self.reversion
    }
}

/// Analytic lagged covariance `K(u) = (noise^2 / 2 reversion) exp(-reversion u)`.
pub fn ou_true_covariance(params: &OUParams, lag: f64) -> f64 {
    params.stationary_variance() * (-params.reversion * lag.abs()).exp()
}

/// Strictly stationary path via the exact Gaussian transition.
///
/// A zero noise is accepted and produces the constant path at the mean.
pub fn simulate_ou(
    params: &OUParams,
    length: usize,
    delta: f64,
    stream: &RandomStreamSpec,
) -> Result<TrajectoryGrid> {
    params.check(true)?;
    if length == 0 {
        return Err(Error::ParameterDomain("trajectory length must be at least 1".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::ParameterDomain(format!("delta must be positive, got {delta}")));
    }
    let mut rng = stream.rng();
    let decay = (-params.reversion * delta).exp();
    let var0 = params.stationary_variance();
    let step_sd = (var0 * -(-2.0 * params.reversion * delta).exp_m1()).sqrt();
    let mut data = Vec::with_capacity(length);
    let z: f64 = rng.sample(StandardNormal);
    let mut x = params.mean + var0.sqrt() * z;
    data.push(x);
    for _ in 1..length {
        let z: f64 = rng.sample(StandardNormal);
        x = params.mean + decay * (x - params.mean) + step_sd * z;
        data.push(x);
    }
    TrajectoryGrid::from_raw(1, delta, data)
}

/// Euler-Maruyama OU path started at `x0`; used to cross-check the exact scheme.
pub fn simulate_ou_euler(
    params: &OUParams,
    length: usize,
    delta: f64,
    x0: f64,
    stream: &RandomStreamSpec,
) -> Result<TrajectoryGrid> {
    params.validate()?;
    if length == 0 {
        return Err(Error::ParameterDomain("trajectory length must be at least 1".into()));
    }
    let mut rng = stream.rng();
    let sd = params.noise * delta.sqrt();
    let mut x = x0;
    let mut data = Vec::with_capacity(length);
    data.push(x);
    for _ in 1..length {
        let z: f64 = rng.sample(StandardNormal);
        x += -params.reversion * (x - params.mean) * delta + sd * z;
        data.push(x);
    }
    TrajectoryGrid::from_raw(1, delta, data)
}
