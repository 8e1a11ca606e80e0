//! Observable approximations `Y^eps` built from a path of the hidden process.
//!
//! Windowed observables drop the samples whose window would reach before the
//! start of the input; the output's sample `j` (0-based) sits at the input's
//! index `j + lead`, where `lead` is reported by the constructor.

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryGrid;

/// An observable together with the number of leading input samples it consumed.
#[derive(Debug, Clone)]
pub struct AlignedObservable {
    pub grid: TrajectoryGrid,
    pub lead: usize,
}

fn steps_per_eps(delta: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::ParameterDomain(format!("eps must be positive, got {eps}")));
    }
    let ratio = eps / delta;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::SchemeGridMismatch(format!(
            "eps = {eps} is not a positive integer multiple of delta = {delta}"
        )));
    }
    Ok(m as usize)
}

/// Realized volatility `Y_t = (1 / (M eps)) sum_{k=1..M} (R_{t_k} - R_{t_{k-1}})^2`
/// over the `M` most recent return steps of size `eps` ending at `t`.
pub fn realized_volatility_observable(
    returns: &TrajectoryGrid,
    eps: f64,
    window: usize,
) -> Result<AlignedObservable> {
    if returns.dim() != 1 {
        return Err(Error::ParameterDomain("returns must be scalar".into()));
    }
    if steps_per_eps(returns.delta(), eps)? != 1 {
        return Err(Error::SchemeGridMismatch(format!(
            "returns step {} must equal eps {eps}",
            returns.delta()
        )));
    }
    if window == 0 {
        return Err(Error::ParameterDomain("window must be at least 1".into()));
    }
    let r = returns.as_slice();
    if r.len() < window + 1 {
        return Err(Error::InsufficientData {
            required: window + 1,
            available: r.len(),
        });
    }
    let sq: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
    let scale = 1.0 / (window as f64 * eps);
    let mut out = Vec::with_capacity(sq.len() + 1 - window);
    // Re-summing each window avoids drift from a running add/subtract sum.
    for end in window..=sq.len() {
        let s: f64 = sq[end - window..end].iter().sum();
        out.push(s * scale);
    }
    Ok(AlignedObservable {
        grid: TrajectoryGrid::from_raw(1, eps, out)?,
        lead: window,
    })
}

/// Default window `ceil(eps^(-1/2))`, optionally scaled.
pub fn default_realized_window(eps: f64, scale: f64) -> usize {
    ((scale * eps.powf(-0.5)).ceil() as usize).max(1)
}

/// Local average `Y_t = (1/eps) int_{t-eps}^t X_s ds`, by the trapezoid rule over
/// the `m = eps / delta` fine steps ending at `t`.
pub fn smoothing_observable(x: &TrajectoryGrid, eps: f64) -> Result<AlignedObservable> {
    let m = steps_per_eps(x.delta(), eps)?;
    let r = x.dim();
    let len = x.len();
    if len < m + 1 {
        return Err(Error::InsufficientData {
            required: m + 1,
            available: len,
        });
    }
    let w = 1.0 / m as f64;
    let mut out = Vec::with_capacity((len - m) * r);
    for end in m..len {
        for c in 0..r {
            let mut acc = 0.5 * (x.sample(end - m)[c] + x.sample(end)[c]);
            for k in end - m + 1..end {
                acc += x.sample(k)[c];
            }
            out.push(acc * w);
        }
    }
    Ok(AlignedObservable {
        grid: TrajectoryGrid::from_raw(r, x.delta(), out)?,
        lead: m,
    })
}

/// `Y = (1 + rho) X` pointwise.
pub fn multiplicative_perturbation_observable(x: &TrajectoryGrid, rho: f64) -> Result<TrajectoryGrid> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::ParameterDomain(format!("rho must be non-negative, got {rho}")));
    }
    let factor = 1.0 + rho;
    TrajectoryGrid::from_raw(
        x.dim(),
        x.delta(),
        x.as_slice().iter().map(|v| v * factor).collect(),
    )
}

/// Sample `L^4` distance `(mean over samples of sup_i |Y_i - X_i|^4)^(1/4)`
/// between an observable and the aligned hidden path.
pub fn sample_l4_distance(y: &TrajectoryGrid, x: &TrajectoryGrid, lead: usize) -> Result<f64> {
    if y.dim() != x.dim() {
        return Err(Error::ParameterDomain("dimension mismatch".into()));
    }
    if x.len() < lead + y.len() {
        return Err(Error::InsufficientData {
            required: lead + y.len(),
            available: x.len(),
        });
    }
    let mut acc = 0.0;
    for j in 0..y.len() {
        let d = y
            .sample(j)
            .iter()
            .zip(x.sample(j + lead))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        acc += d.powi(4);
    }
    Ok((acc / y.len() as f64).powf(0.25))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ou::{simulate_ou, OUParams};
    use crate::models::heston::{simulate_heston, HestonParams, VarianceStart};
    use crate::rng::{RandomStreamSpec, StreamRole};

    #[test]
    fn realized_volatility_of_constant_returns_is_zero() {
        let r = TrajectoryGrid::scalar(0.01, vec![1.0; 50]).unwrap();
        let y = realized_volatility_observable(&r, 0.01, 5).unwrap();
        assert_eq!(y.lead, 5);
        assert_eq!(y.grid.len(), 45);
        assert!(y.grid.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn realized_volatility_of_linear_returns() {
        let (eps, d) = (0.01, 0.003);
        let r = TrajectoryGrid::scalar(eps, (0..40).map(|k| k as f64 * d).collect()).unwrap();
        let y = realized_volatility_observable(&r, eps, 7).unwrap();
        for &v in y.grid.as_slice() {
            assert!((v - d * d / eps).abs() < 1e-12);
        }
    }

    #[test]
    fn realized_volatility_requires_window() {
        let r = TrajectoryGrid::scalar(0.01, vec![0.0; 5]).unwrap();
        assert!(matches!(
            realized_volatility_observable(&r, 0.01, 5),
            Err(Error::InsufficientData { .. })
        ));
        assert!(realized_volatility_observable(&r, 0.02, 2).is_err());
    }

    #[test]
    fn smoothing_identities() {
        let c = TrajectoryGrid::scalar(0.1, vec![2.5; 30]).unwrap();
        let y = smoothing_observable(&c, 0.4).unwrap();
        assert!(y.grid.as_slice().iter().all(|v| (v - 2.5).abs() < 1e-14));

        let delta = 0.1;
        let lin = TrajectoryGrid::scalar(delta, (1..=30).map(|n| n as f64 * delta).collect()).unwrap();
        let eps = 0.4;
        let y = smoothing_observable(&lin, eps).unwrap();
        for j in 0..y.grid.len() {
            let t = (j + y.lead + 1) as f64 * delta;
            assert!((y.grid.sample(j)[0] - (t - eps / 2.0)).abs() < 1e-12);
        }
        assert!(matches!(
            smoothing_observable(&lin, 0.25),
            Err(Error::SchemeGridMismatch(_))
        ));
    }

    #[test]
    fn multiplicative_identities() {
        let x = TrajectoryGrid::scalar(1.0, vec![2.0, -1.0]).unwrap();
        assert_eq!(multiplicative_perturbation_observable(&x, 0.0).unwrap(), x);
        let y = multiplicative_perturbation_observable(&x, 0.5).unwrap();
        assert_eq!(y.as_slice(), &[3.0, -1.5]);
        assert!(multiplicative_perturbation_observable(&x, -0.1).is_err());
    }

    #[test]
    fn multiplicative_distance_is_exact() {
        let p = OUParams::new(0.0, 1.0, 2f64.sqrt()).unwrap();
        let x = simulate_ou(&p, 200_000, 0.05, &RandomStreamSpec::new(9, 0, StreamRole::ProcessNoise))
            .unwrap();
        let y = multiplicative_perturbation_observable(&x, 0.1).unwrap();
        let d = sample_l4_distance(&y, &x, 0).unwrap();
        let zero = TrajectoryGrid::scalar(0.05, vec![0.0; x.len()]).unwrap();
        let norm = sample_l4_distance(&x, &zero, 0).unwrap();
        assert!((d / norm - 0.1).abs() < 1e-12);
        // Stationary L4 norm is 3^(1/4) for unit variance.
        assert!((norm - 3f64.powf(0.25)).abs() < 0.05);
    }

    #[test]
    fn smoothing_distance_shrinks_like_sqrt_eps() {
        let p = OUParams::new(0.0, 1.0, 2f64.sqrt()).unwrap();
        let delta = 0.005;
        let x = simulate_ou(&p, 400_000, delta, &RandomStreamSpec::new(10, 0, StreamRole::ProcessNoise))
            .unwrap();
        let mut logs = Vec::new();
        for eps in [0.4, 0.1, 0.025] {
            let y = smoothing_observable(&x, eps).unwrap();
            let d = sample_l4_distance(&y.grid, &x, y.lead).unwrap();
            logs.push((f64::ln(eps), d.ln()));
        }
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 0.5).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn realized_volatility_tracks_variance_as_eps_shrinks() {
        let p = HestonParams::new(0.0, 2.0, 0.04, 0.3).unwrap();
        let mut errs = Vec::new();
        for (k, eps) in [0.04, 0.01, 0.0025].into_iter().enumerate() {
            let n = (2000.0 / eps) as usize;
            let s = RandomStreamSpec::new(30, k as u64, StreamRole::ProcessNoise);
            let paths = simulate_heston(&p, n, eps, &s, VarianceStart::Stationary).unwrap();
            let y = realized_volatility_observable(&paths.returns, eps, default_realized_window(eps, 1.0))
                .unwrap();
            let v = paths.variance.as_slice();
            let err = y
                .grid
                .as_slice()
                .iter()
                .enumerate()
                .map(|(j, yv)| (yv - v[j + y.lead]).abs())
                .sum::<f64>()
                / y.grid.len() as f64;
            errs.push(err);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}
