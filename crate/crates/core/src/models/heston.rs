use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RandomStreamSpec, StreamRole};
use crate::trajectory::TrajectoryGrid;

/// Heston model with independent price and variance drivers:
///
/// ```text
/// dS = drift S dt + sqrt(V) S dW1
/// dV = vol_reversion (vol_mean - V) dt + vol_of_vol sqrt(V) dW2
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonParams {
    #[serde(default)]
    pub drift: f64,
    pub vol_reversion: f64,
    pub vol_mean: f64,
    pub vol_of_vol: f64,
}

impl HestonParams {
    pub fn new(drift: f64, vol_reversion: f64, vol_mean: f64, vol_of_vol: f64) -> Result<Self> {
        let p = Self {
            drift,
            vol_reversion,
            vol_mean,
            vol_of_vol,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::ParameterDomain(format!("{name} must be positive, got {v}")))
            }
        };
        if !self.drift.is_finite() {
            return Err(Error::ParameterDomain("drift must be finite".into()));
        }
        positive("vol_reversion", self.vol_reversion)?;
        positive("vol_mean", self.vol_mean)?;
        positive("vol_of_vol", self.vol_of_vol)
    }

    /// `2 kappa theta / sigma^2`; the variance stays off zero when it is at least 1.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.vol_reversion * self.vol_mean / (self.vol_of_vol * self.vol_of_vol)
    }

    pub fn satisfies_feller(&self) -> bool {
        self.feller_ratio() >= 1.0
    }

    /// Stationary CIR variance `sigma^2 theta / (2 kappa)`.
    pub fn variance_of_variance(&self) -> f64 {
        self.vol_of_vol * self.vol_of_vol * self.vol_mean / (2.0 * self.vol_reversion)
    }

    /// Stationary lagged covariance of `V`.
    pub fn variance_covariance(&self, lag: f64) -> f64 {
        self.variance_of_variance() * (-self.vol_reversion * lag.abs()).exp()
    }

    /// `L^4` norm of the stationary Gamma law of `V`.
    pub fn variance_l4_norm(&self) -> f64 {
        // Gamma(shape a, scale b): E[V^4] = a (a+1) (a+2) (a+3) b^4.
        let a = self.feller_ratio();
        let b = self.vol_of_vol * self.vol_of_vol / (2.0 * self.vol_reversion);
        (a * (a + 1.0) * (a + 2.0) * (a + 3.0)).powf(0.25) * b
    }

    fn stationary_law(&self) -> Gamma<f64> {
        let b = self.vol_of_vol * self.vol_of_vol / (2.0 * self.vol_reversion);
        Gamma::new(self.feller_ratio(), b).expect("validated parameters")
    }
}

/// Initial variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceStart {
    Stationary,
    Fixed(f64),
}

/// Cumulative returns `R` (with `dR = dS / S`) and the variance path `V`.
#[derive(Debug, Clone)]
pub struct HestonPaths {
    pub returns: TrajectoryGrid,
    pub variance: TrajectoryGrid,
}

/// Full-truncation Euler scheme: negative variance is clamped to zero inside the
/// drift and the square root. The price driver uses the process-noise stream and
/// the variance driver the auxiliary stream of the same replication.
pub fn simulate_heston(
    params: &HestonParams,
    length: usize,
    delta_fine: f64,
    stream: &RandomStreamSpec,
    v0: VarianceStart,
) -> Result<HestonPaths> {
    params.validate()?;
    if length == 0 {
        return Err(Error::ParameterDomain("trajectory length must be at least 1".into()));
    }
    if !(delta_fine > 0.0 && delta_fine.is_finite()) {
        return Err(Error::ParameterDomain(format!("delta must be positive, got {delta_fine}")));
    }
    let mut price_rng = stream.with_role(StreamRole::ProcessNoise).rng();
    let mut var_rng = stream.with_role(StreamRole::AuxiliaryNoise).rng();
    let mut v = match v0 {
        VarianceStart::Stationary => params.stationary_law().sample(&mut var_rng),
        VarianceStart::Fixed(v) if v >= 0.0 && v.is_finite() => v,
        VarianceStart::Fixed(v) => {
            return Err(Error::ParameterDomain(format!("initial variance {v}")))
        }
    };
    let (kappa, theta, sigma) = (params.vol_reversion, params.vol_mean, params.vol_of_vol);
    let sq = delta_fine.sqrt();
    let mut r = 0.0;
    let mut returns = Vec::with_capacity(length);
    let mut variance = Vec::with_capacity(length);
    returns.push(r);
    variance.push(v);
    for step in 1..length {
        let vp = v.max(0.0);
        let root = vp.sqrt();
        let z1: f64 = price_rng.sample(StandardNormal);
        let z2: f64 = var_rng.sample(StandardNormal);
        r += params.drift * delta_fine + root * sq * z1;
        v += kappa * (theta - vp) * delta_fine + sigma * root * sq * z2;
        if !(v.is_finite() && r.is_finite()) {
            return Err(Error::SimulationDiverged { step });
        }
        returns.push(r);
        // Full truncation keeps the reported path non-negative.
        variance.push(v.max(0.0));
    }
    Ok(HestonPaths {
        returns: TrajectoryGrid::from_raw(1, delta_fine, returns)?,
        variance: TrajectoryGrid::from_raw(1, delta_fine, variance)?,
    })
}
