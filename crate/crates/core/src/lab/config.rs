//! Experiment configuration (TOML). Unknown keys are rejected.
//!
//! ```toml
//! name = "ou-rate"
//! master_seed = 7
//! replications = 200
//! epsilon_grid = [0.1, 0.0464, 0.0215, 0.01]
//! lags = [0.0, 0.5, 1.0]
//! stride_resolution = 1
//!
//! [model]
//! kind = "ou"
//! mean = 0.0
//! reversion = 1.0
//! noise = 1.4142135623730951
//!
//! [observable]
//! kind = "identity"
//!
//! [rho]
//! kind = "identity"
//!
//! [scheme]
//! family = "from_n"
//! c_delta = 1.0
//! n_obs = [1000, 10000, 100000, 1000000]
//!
//! [bounds]
//! source = "model"
//!
//! [[checks]]
//! kind = "slope_k_x_vs_n"
//! min = -0.43
//! max = -0.23
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inversion::ParameterBall;
use crate::models::ModelSpec;
use crate::scheduler::BoundInputs;

fn default_replications() -> usize {
    200
}

fn default_resolution() -> usize {
    10
}

fn default_memory_cap() -> f64 {
    2048.0
}

fn default_u1() -> f64 {
    1.0
}

fn default_window_scale() -> f64 {
    1.0
}

fn one() -> f64 {
    1.0
}

/// How `Y^eps` is built from the simulated paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// `Y = X`.
    Identity,
    /// `Y = (1 + rho) X`.
    Multiplicative,
    /// Local average over the last `eps` time units.
    Smoothing,
    /// Realized volatility of Heston returns at step `eps`, window
    /// `ceil(window_scale * eps^(-1/2))`.
    RealizedVolatility {
        #[serde(default = "default_window_scale")]
        window_scale: f64,
    },
    /// Slow variable of a slow-fast system with time-scale `eps`.
    SlowFast,
}

/// `eps -> rho(eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoSpec {
    Identity {
        #[serde(default = "one")]
        scale: f64,
    },
    Sqrt {
        #[serde(default = "one")]
        scale: f64,
    },
    /// One value per entry of the epsilon grid.
    Table { values: Vec<f64> },
}

impl RhoSpec {
    pub fn eval(&self, eps: f64, index: usize) -> f64 {
        match self {
            Self::Identity { scale } => scale * eps,
            Self::Sqrt { scale } => scale * eps.sqrt(),
            Self::Table { values } => values[index],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScheme {
    pub n_obs: usize,
    pub big_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeFamily {
    /// `N = ceil(c_n rho^-3)`, `Delta = c_delta rho`.
    FromRho {
        #[serde(default = "one")]
        c_n: f64,
        #[serde(default = "one")]
        c_delta: f64,
    },
    /// `Delta = c_delta N^(-1/3)` for one `N` per epsilon.
    FromN {
        #[serde(default = "one")]
        c_delta: f64,
        n_obs: Vec<usize>,
    },
    Custom { schemes: Vec<CustomScheme> },
}

impl SchemeFamily {
    /// Constant `c` with `Delta = c N^(-1/3)`, when the family has one.
    pub fn n_cube_root_constant(&self) -> Option<f64> {
        match self {
            Self::FromRho { c_n, c_delta } => Some(c_delta * c_n.cbrt()),
            Self::FromN { c_delta, .. } => Some(*c_delta),
            Self::Custom { .. } => None,
        }
    }
}

/// Closed-form inverse applied to the observable moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ou,
    Cir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSpec {
    pub estimator: Estimator,
    #[serde(default = "default_u1")]
    pub u1: f64,
    #[serde(default)]
    pub ball: Option<ParameterBall>,
}

/// Where the bound constants come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundsSpec {
    /// Derived analytically from the model (OU only).
    Model,
    Explicit(BoundInputs),
}

/// Named acceptance thresholds evaluated on the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Slope of the `L^2` error of the hidden estimator vs `N`, every lag.
    SlopeKXVsN { min: f64, max: f64 },
    /// Slope of the `L^2` error of the observable estimator vs `rho`, every lag.
    SlopeKYVsRho { min: f64, max: f64 },
    /// Slope of the paired gap vs `rho`, every lag.
    SlopeGapVsRho { min: f64, max: f64 },
    /// Slope of the mean error in `L^p` vs `N Delta`.
    SlopeMeanVsSpan { p: u32, min: f64, max: f64 },
    /// Fraction of `(eps, lag)` points under the unobservable bound.
    BoundFraction { min: f64 },
    /// Paired gap below `4 nu rho` at every point.
    GapWithinBound,
    /// Mean gap in `L^4` below `rho` at every epsilon.
    MeanGapWithinRho,
    /// `max / min` of `error / rho` over the sweep, every lag.
    ErrorOverRhoBand { max_ratio: f64 },
    /// At the smallest epsilon, each parameter within 10% relative error in
    /// at least `min_fraction` of the replications.
    EstimationWithin { min_fraction: f64 },
    /// Relative RMSE of one parameter at the smallest epsilon.
    EstimationRmse { parameter: String, max_relative: f64 },
    /// Relative RMSE of every parameter non-increasing along the grid from `from_index`.
    EstimationRmseNonIncreasing {
        #[serde(default)]
        from_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub master_seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub epsilon_grid: Vec<f64>,
    pub lags: Vec<f64>,
    /// Fine steps per sub-sampling step.
    #[serde(default = "default_resolution")]
    pub stride_resolution: usize,
    /// Burn-in steps; the model default when absent.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_mb: f64,
    pub model: ModelSpec,
    pub observable: ObservableSpec,
    pub rho: RhoSpec,
    pub scheme: SchemeFamily,
    #[serde(default)]
    pub estimation: Option<EstimationSpec>,
    #[serde(default)]
    pub bounds: Option<BoundsSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form; stable under reformatting of the file.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let g = &self.epsilon_grid;
        if g.len() < 3 {
            return bad(format!("epsilon_grid needs at least 3 values, got {}", g.len()));
        }
        if g.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("epsilon_grid values must be positive".into());
        }
        if g.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("epsilon_grid must be strictly decreasing".into());
        }
        if self.replications < 30 {
            return bad(format!("replications must be at least 30, got {}", self.replications));
        }
        if self.lags.is_empty() {
            return bad("lags must not be empty".into());
        }
        if self.lags.iter().any(|u| !(*u >= 0.0 && u.is_finite())) {
            return bad("lags must be finite and >= 0".into());
        }
        if self.stride_resolution == 0 {
            return bad("stride_resolution must be positive".into());
        }
        if !(self.memory_cap_mb > 0.0) {
            return bad("memory_cap_mb must be positive".into());
        }
        self.model.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        let n = g.len();
        match &self.rho {
            RhoSpec::Table { values } if values.len() != n => {
                return bad(format!("rho table has {} values for {n} epsilons", values.len()))
            }
            RhoSpec::Table { values } if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) => {
                return bad("rho table values must be >= 0".into())
            }
            RhoSpec::Identity { scale } | RhoSpec::Sqrt { scale } if !(*scale > 0.0) => {
                return bad("rho scale must be positive".into())
            }
            _ => {}
        }
        match &self.scheme {
            SchemeFamily::FromN { n_obs, c_delta } => {
                if n_obs.len() != n {
                    return bad(format!("scheme.n_obs has {} values for {n} epsilons", n_obs.len()));
                }
                if !(*c_delta > 0.0) {
                    return bad("c_delta must be positive".into());
                }
            }
            SchemeFamily::FromRho { c_n, c_delta } => {
                if !(*c_n > 0.0 && *c_delta > 0.0) {
                    return bad("c_n and c_delta must be positive".into());
                }
            }
            SchemeFamily::Custom { schemes } => {
                if schemes.len() != n {
                    return bad(format!("{} custom schemes for {n} epsilons", schemes.len()));
                }
            }
        }
        let needs = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("observable {what} does not fit model '{}'", self.model.name())))
            }
        };
        match (&self.observable, &self.model) {
            (ObservableSpec::RealizedVolatility { window_scale }, m) => {
                needs(matches!(m, ModelSpec::Heston(_)), "realized_volatility")?;
                if !(*window_scale > 0.0) {
                    return bad("window_scale must be positive".into());
                }
            }
            (ObservableSpec::SlowFast, m) => needs(matches!(m, ModelSpec::SlowFast(_)), "slow_fast")?,
            _ => {}
        }
        if let Some(est) = &self.estimation {
            if !(est.u1 > 0.0) {
                return bad("estimation.u1 must be positive".into());
            }
            let fits = matches!(
                (est.estimator, &self.model),
                (Estimator::Ou, ModelSpec::Ou(_))
                    | (Estimator::Ou, ModelSpec::SlowFast(_))
                    | (Estimator::Cir, ModelSpec::Heston(_))
            );
            if !fits {
                return bad(format!("estimator does not fit model '{}'", self.model.name()));
            }
        }
        if let Some(BoundsSpec::Model) = &self.bounds {
            if !matches!(self.model, ModelSpec::Ou(_)) {
                return bad("bounds.source = 'model' needs an OU model".into());
            }
        }
        Ok(())
    }
}
