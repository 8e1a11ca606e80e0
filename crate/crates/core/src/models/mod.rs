//! Simulators for hidden processes and constructors for their observables.

pub mod gradient;
pub mod heston;
pub mod observables;
pub mod ou;
pub mod slow_fast;

use serde::{Deserialize, Serialize};

pub use gradient::{simulate_gradient_diffusion, GradientDiffusionParams, PolynomialPotential};
pub use heston::{simulate_heston, HestonParams, HestonPaths, VarianceStart};
pub use observables::{
    default_realized_window, multiplicative_perturbation_observable, realized_volatility_observable,
    sample_l4_distance, smoothing_observable, AlignedObservable,
};
pub use ou::{ou_true_covariance, simulate_ou, simulate_ou_euler, OUParams};
pub use slow_fast::{simulate_slow_fast, SlowFastCatalog, SlowFastParams, SlowFastPaths};

use crate::error::Result;
use crate::rng::RandomStreamSpec;
use crate::trajectory::TrajectoryGrid;

/// Model selection as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ou(OUParams),
    Gradient(GradientDiffusionParams),
    Heston(HestonParams),
    SlowFast(SlowFastParams),
}

/// Output of [`ModelSpec::simulate`]: the hidden path plus any companion paths
/// (Heston returns, slow-fast slow variable) keyed by name.
#[derive(Debug, Clone)]
pub struct SimulatedPaths {
    pub hidden: TrajectoryGrid,
    pub companions: Vec<(&'static str, TrajectoryGrid)>,
}

impl SimulatedPaths {
    pub fn companion(&self, name: &str) -> Option<&TrajectoryGrid> {
        self.companions.iter().find(|(n, _)| *n == name).map(|(_, g)| g)
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ou(_) => "ou",
            Self::Gradient(_) => "gradient",
            Self::Heston(_) => "heston",
            Self::SlowFast(_) => "slow_fast",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Ou(p) => p.validate(),
            Self::Gradient(p) => p.validate(),
            Self::Heston(p) => p.validate(),
            Self::SlowFast(p) => SlowFastParams::new(p.scale, p.catalog).map(|_| ()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gradient(p) => p.dim(),
            _ => 1,
        }
    }

    /// Whether the simulator samples the hidden process exactly at any step.
    pub fn exact_transition(&self) -> bool {
        matches!(self, Self::Ou(_))
    }

    /// Ten relaxation times of the slowest mode, in steps of `delta`. Zero for
    /// simulators that start in their stationary law.
    pub fn default_burn_in(&self, delta: f64) -> usize {
        match self {
            Self::Ou(_) | Self::Heston(_) => 0,
            Self::Gradient(p) => p.default_burn_in(delta),
            Self::SlowFast(p) => (10.0 / p.catalog.reduced_ou().reversion / delta).ceil() as usize,
        }
    }

    pub fn simulate(
        &self,
        length: usize,
        delta: f64,
        stream: &RandomStreamSpec,
        burn_in: Option<usize>,
    ) -> Result<SimulatedPaths> {
        let burn_in = burn_in.unwrap_or_else(|| self.default_burn_in(delta));
        match self {
            Self::Ou(p) => {
                // Exact transition: burn-in only wastes draws but is honoured.
                let g = simulate_ou(p, burn_in + length, delta, stream)?;
                Ok(SimulatedPaths {
                    hidden: g.skip(burn_in)?,
                    companions: Vec::new(),
                })
            }
            Self::Gradient(p) => Ok(SimulatedPaths {
                hidden: simulate_gradient_diffusion(p, length, delta, stream, burn_in)?,
                companions: Vec::new(),
            }),
            Self::Heston(p) => {
                let paths = simulate_heston(p, burn_in + length, delta, stream, VarianceStart::Stationary)?;
                Ok(SimulatedPaths {
                    hidden: paths.variance.skip(burn_in)?,
                    companions: vec![("returns", paths.returns.skip(burn_in)?)],
                })
            }
            Self::SlowFast(p) => {
                let paths = simulate_slow_fast(p, length, delta, stream, burn_in)?;
                Ok(SimulatedPaths {
                    hidden: paths.reduced,
                    companions: vec![("slow", paths.slow)],
                })
            }
        }
    }

    /// Analytic stationary mean of a scalar hidden process, when known.
    pub fn oracle_mean(&self) -> Option<f64> {
        match self {
            Self::Ou(p) => Some(p.mean),
            Self::Heston(p) => Some(p.vol_mean),
            Self::SlowFast(p) => Some(p.catalog.reduced_ou().mean),
            Self::Gradient(_) => None,
        }
    }

    /// Analytic lagged covariance of a scalar hidden process, when known.
    pub fn oracle_covariance(&self, lag: f64) -> Option<f64> {
        match self {
            Self::Ou(p) => Some(ou_true_covariance(p, lag)),
            Self::Heston(p) => Some(p.variance_covariance(lag)),
            Self::SlowFast(p) => Some(ou_true_covariance(&p.catalog.reduced_ou(), lag)),
            Self::Gradient(_) => None,
        }
    }

    /// Stationary `L^4` norm of the hidden process, when known.
    pub fn l4_norm(&self) -> Option<f64> {
        match self {
            Self::Ou(p) => Some(p.l4_norm()),
            Self::Heston(p) => Some(p.variance_l4_norm()),
            Self::SlowFast(p) => Some(p.catalog.reduced_ou().l4_norm()),
            Self::Gradient(_) => None,
        }
    }

    /// Lipschitz constant of the covariance curve, when known.
    pub fn covariance_lipschitz(&self) -> Option<f64> {
        match self {
            Self::Ou(p) => Some(p.covariance_lipschitz()),
            Self::Heston(p) => Some(p.variance_of_variance() * p.vol_reversion),
            Self::SlowFast(p) => Some(p.catalog.reduced_ou().covariance_lipschitz()),
            Self::Gradient(_) => None,
        }
    }
}
