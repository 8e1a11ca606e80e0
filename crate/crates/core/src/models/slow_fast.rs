//! Slow-fast systems
//!
//! ```text
//! dx = a(x, y) dt + b(x, y) dW1
//! dy = c(x, y) / eps dt + d(x, y) / sqrt(eps) dW2
//! ```
//!
//! and their averaged limits `dX = A(X) dt + B(X) dW1` with `A = E_q a` and
//! `B B^T = E_q b b^T` under the fast invariant law `q(y | x)`.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ou::OUParams;
use crate::rng::{RandomStreamSpec, StreamRole};
use crate::trajectory::TrajectoryGrid;

/// Fixed catalog of coefficient sets with closed-form averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlowFastCatalog {
    /// `a = -x + y`, `b = 1`, `c = -y`, `d = sqrt(2)`; `q = N(0, 1)`.
    LinearOu,
    /// `a = -x + sin y`, `b = sqrt(1 + cos^2 y)`, `c = -y`, `d = sqrt(2)`; `q = N(0, 1)`.
    SineForcing,
    /// `a = -y`, `b = 1`, `c = x - y`, `d = sqrt(2)`; `q = N(x, 1)`.
    Tracking,
}

impl SlowFastCatalog {
    pub fn a(self, x: f64, y: f64) -> f64 {
        match self {
            Self::LinearOu => -x + y,
            Self::SineForcing => -x + y.sin(),
            Self::Tracking => -y,
        }
    }

    pub fn b(self, _x: f64, y: f64) -> f64 {
        match self {
            Self::SineForcing => (1.0 + y.cos().powi(2)).sqrt(),
            Self::LinearOu | Self::Tracking => 1.0,
        }
    }

    pub fn c(self, x: f64, y: f64) -> f64 {
        match self {
            Self::LinearOu | Self::SineForcing => -y,
            Self::Tracking => x - y,
        }
    }

    pub fn d(self, _x: f64, _y: f64) -> f64 {
        SQRT_2
    }

    /// Mean of the fast invariant law `q(y | x)`; its variance is 1 for every entry.
    pub fn fast_mean(self, x: f64) -> f64 {
        match self {
            Self::Tracking => x,
            Self::LinearOu | Self::SineForcing => 0.0,
        }
    }

    /// Averaged drift `A(x)`.
    pub fn averaged_drift(self, x: f64) -> f64 {
        // E sin(Y) = 0 and E[-Y] = -x under the respective fast laws.
        -x
    }

    /// Averaged squared diffusion `B B^T`, constant for every entry.
    pub fn averaged_diffusion_sq(self) -> f64 {
        match self {
            // E cos^2 Y = (1 + e^-2) / 2 for Y ~ N(0, 1).
            Self::SineForcing => 1.0 + 0.5 * (1.0 + (-2f64).exp()),
            Self::LinearOu | Self::Tracking => 1.0,
        }
    }

    /// The reduced process is OU for every catalog entry.
    pub fn reduced_ou(self) -> OUParams {
        OUParams {
            mean: 0.0,
            reversion: 1.0,
            noise: self.averaged_diffusion_sq().sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowFastParams {
    pub scale: f64,
    pub catalog: SlowFastCatalog,
}

impl SlowFastParams {
    pub fn new(scale: f64, catalog: SlowFastCatalog) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::ParameterDomain(format!("scale eps must be positive, got {scale}")));
        }
        Ok(Self { scale, catalog })
    }
}

/// Slow path `x` (the observable) and the reduced path `X` driven by the same `W1`.
#[derive(Debug, Clone)]
pub struct SlowFastPaths {
    pub slow: TrajectoryGrid,
    pub reduced: TrajectoryGrid,
}

/// Euler-Maruyama for both systems. `x` and `X` start from the same draw of the
/// reduced stationary law and `y` from `q(y | x)`; `burn_in` steps are discarded.
pub fn simulate_slow_fast(
    params: &SlowFastParams,
    length: usize,
    delta_fine: f64,
    stream: &RandomStreamSpec,
    burn_in: usize,
) -> Result<SlowFastPaths> {
    let eps = params.scale;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::ParameterDomain(format!("scale eps must be positive, got {eps}")));
    }
    if !(delta_fine > 0.0 && delta_fine <= eps / 10.0 * (1.0 + 1e-12)) {
        return Err(Error::ParameterDomain(format!(
            "fine step {delta_fine} must resolve the fast scale (<= eps / 10 = {})",
            eps / 10.0
        )));
    }
    if length == 0 {
        return Err(Error::ParameterDomain("trajectory length must be at least 1".into()));
    }
    let cat = params.catalog;
    let mut slow_rng = stream.with_role(StreamRole::ProcessNoise).rng();
    let mut fast_rng = stream.with_role(StreamRole::AuxiliaryNoise).rng();
    let reduced_sd = (cat.averaged_diffusion_sq() / 2.0).sqrt();
    let z: f64 = slow_rng.sample(StandardNormal);
    let mut x = reduced_sd * z;
    let mut big_x = x;
    let z: f64 = fast_rng.sample(StandardNormal);
    let mut y = cat.fast_mean(x) + z;
    let b_avg = cat.averaged_diffusion_sq().sqrt();
    let sq = delta_fine.sqrt();
    let fast_dt = delta_fine / eps;
    let fast_sq = fast_dt.sqrt();
    let mut slow = Vec::with_capacity(length);
    let mut reduced = Vec::with_capacity(length);
    for step in 0..burn_in + length {
        let w1: f64 = slow_rng.sample(StandardNormal);
        let w2: f64 = fast_rng.sample(StandardNormal);
        let (xo, yo) = (x, y);
        x = xo + cat.a(xo, yo) * delta_fine + cat.b(xo, yo) * sq * w1;
        y = yo + cat.c(xo, yo) * fast_dt + cat.d(xo, yo) * fast_sq * w2;
        big_x += cat.averaged_drift(big_x) * delta_fine + b_avg * sq * w1;
        if !(x.is_finite() && y.is_finite() && big_x.is_finite()) {
            return Err(Error::SimulationDiverged { step });
        }
        if step >= burn_in {
            slow.push(x);
            reduced.push(big_x);
        }
    }
    Ok(SlowFastPaths {
        slow: TrajectoryGrid::from_raw(1, delta_fine, slow)?,
        reduced: TrajectoryGrid::from_raw(1, delta_fine, reduced)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Numerical average of `a(x, .)` and `b(x, .)^2` against the Gaussian fast law.
    fn gauss_average(f: impl Fn(f64) -> f64, mean: f64) -> f64 {
        let n = 4000;
        let (lo, hi) = (-10.0, 10.0);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let z = lo + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += w * f(mean + z) * (-0.5 * z * z).exp();
        }
        acc * h / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn closed_form_averages_match_quadrature() {
        for cat in [
            SlowFastCatalog::LinearOu,
            SlowFastCatalog::SineForcing,
            SlowFastCatalog::Tracking,
        ] {
            for x in [-1.5, 0.0, 0.7] {
                let m = cat.fast_mean(x);
                let a = gauss_average(|y| cat.a(x, y), m);
                let b2 = gauss_average(|y| cat.b(x, y).powi(2), m);
                assert!((a - cat.averaged_drift(x)).abs() < 1e-8, "{cat:?} a");
                assert!((b2 - cat.averaged_diffusion_sq()).abs() < 1e-8, "{cat:?} b");
            }
        }
    }

    #[test]
    fn resolution_guard() {
        let p = SlowFastParams::new(0.1, SlowFastCatalog::LinearOu).unwrap();
        let s = RandomStreamSpec::new(1, 0, StreamRole::ProcessNoise);
        assert!(matches!(
            simulate_slow_fast(&p, 10, 0.05, &s, 0),
            Err(Error::ParameterDomain(_))
        ));
    }

    #[test]
    fn unit_scale_base_case_stays_finite() {
        let p = SlowFastParams::new(1.0, SlowFastCatalog::LinearOu).unwrap();
        let s = RandomStreamSpec::new(2, 0, StreamRole::ProcessNoise);
        let paths = simulate_slow_fast(&p, 100_000, 0.01, &s, 0).unwrap();
        assert!(paths.slow.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn slow_path_approaches_reduced_path() {
        let mut dists = Vec::new();
        for (k, eps) in [0.1, 0.05, 0.025].into_iter().enumerate() {
            let p = SlowFastParams::new(eps, SlowFastCatalog::LinearOu).unwrap();
            let delta = eps / 10.0;
            let n = (400.0 / delta) as usize;
            let s = RandomStreamSpec::new(3, k as u64, StreamRole::ProcessNoise);
            let paths = simulate_slow_fast(&p, n, delta, &s, 0).unwrap();
            let d = paths
                .slow
                .as_slice()
                .iter()
                .zip(paths.reduced.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / n as f64;
            dists.push(d.sqrt());
        }
        assert!(dists[0] > dists[1] && dists[1] > dists[2], "{dists:?}");
    }

    #[test]
    fn reduced_variance_matches_average() {
        let p = SlowFastParams::new(0.05, SlowFastCatalog::SineForcing).unwrap();
        let delta = 0.005;
        let n = 1_000_000;
        let s = RandomStreamSpec::new(4, 0, StreamRole::ProcessNoise);
        let paths = simulate_slow_fast(&p, n, delta, &s, 2000).unwrap();
        let v = paths.reduced.as_slice();
        let var = v.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let target = SlowFastCatalog::SineForcing.reduced_ou().stationary_variance();
        assert!((var / target - 1.0).abs() < 0.1, "var {var} target {target}");
    }
}
