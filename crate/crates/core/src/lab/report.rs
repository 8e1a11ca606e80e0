//! Aggregation of an ensemble into Monte Carlo `L^p` errors, fitted rate
//! exponents, bound comparisons and named threshold checks.

use serde::{Deserialize, Serialize};

use super::config::{BoundsSpec, CheckSpec, ExperimentConfig, ObservableSpec};
use super::engine::{true_parameters, Ensemble};
use crate::error::{Error, Result};
use crate::estimators::sup_norm;
use crate::models::ModelSpec;
use crate::scheduler::{
    error_bound_observable, error_bound_unobservable, mean_error_bound, ou_bound_inputs, BoundInputs,
};

/// Monte Carlo `L^p` norm with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpError {
    pub value: f64,
    pub std_error: f64,
}

/// `(mean of |s|^p)^(1/p)` over replications, with a delta-method standard error.
pub fn lp_norm(samples: &[f64], p: u32) -> LpError {
    let m = samples.len() as f64;
    let powers: Vec<f64> = samples.iter().map(|s| s.abs().powi(p as i32)).collect();
    let mean = powers.iter().sum::<f64>() / m;
    let var = powers.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let value = mean.powf(1.0 / p as f64);
    let std_error = if mean > 0.0 {
        value / (p as f64 * mean) * (var / m).sqrt()
    } else {
        0.0
    };
    LpError { value, std_error }
}

/// Which estimate of a pair to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    Observable,
    Hidden,
}

/// `||K_hat(u) - target(u)||_p` per `(eps, lag)` with the sup-entry norm;
/// `target` holds one row-major matrix per lag.
pub fn empirical_lp_error(ensemble: &Ensemble, p: u32, kind: EstimateKind, target: &[Vec<f64>]) -> Vec<Vec<LpError>> {
    (0..ensemble.points.len())
        .map(|e| {
            let recs = ensemble.records_at(e);
            (0..target.len())
                .map(|l| {
                    let errs: Vec<f64> = recs
                        .iter()
                        .map(|r| {
                            let k = match kind {
                                EstimateKind::Observable => &r.k_y[l],
                                EstimateKind::Hidden => &r.k_x[l],
                            };
                            sup_norm(&diff(k, &target[l]))
                        })
                        .collect();
                    lp_norm(&errs, p)
                })
                .collect()
        })
        .collect()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::ParameterDomain(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::ParameterDomain("slope fit needs positive finite values".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::ParameterDomain("slope fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Paired-gap comparison at one epsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    pub eps: f64,
    pub rho: f64,
    pub nu: f64,
    /// `||K_Y(u) - K_X(u)||_2` per lag.
    pub gaps: Vec<LpError>,
    pub bound: f64,
    pub passed: bool,
    /// `||Ybar - Xbar||_4`.
    pub mean_gap_l4: LpError,
    pub mean_passed: bool,
}

/// Compares the paired gaps with `4 nu rho` and the mean gap with `rho`.
pub fn perturbation_gap_check(ensemble: &Ensemble, nu: &[f64], rho_values: &[f64]) -> Result<Vec<GapCheck>> {
    let n_points = ensemble.points.len();
    if nu.len() != n_points || rho_values.len() != n_points {
        return Err(Error::ParameterDomain("one nu and one rho per epsilon required".into()));
    }
    let lags = ensemble.config.lags.len();
    if ensemble
        .records
        .iter()
        .any(|r| r.k_y.len() != lags || r.k_x.len() != lags || r.mean_y.len() != r.mean_x.len())
    {
        return Err(Error::ParameterDomain("ensemble is not paired".into()));
    }
    Ok((0..n_points)
        .map(|e| {
            let recs = ensemble.records_at(e);
            let gaps: Vec<LpError> = (0..lags)
                .map(|l| {
                    let s: Vec<f64> = recs.iter().map(|r| sup_norm(&diff(&r.k_y[l], &r.k_x[l]))).collect();
                    lp_norm(&s, 2)
                })
                .collect();
            let mean_gaps: Vec<f64> = recs.iter().map(|r| sup_norm(&diff(&r.mean_y, &r.mean_x))).collect();
            let mean_gap_l4 = lp_norm(&mean_gaps, 4);
            let bound = 4.0 * nu[e] * rho_values[e];
            GapCheck {
                eps: ensemble.points[e].eps,
                rho: rho_values[e],
                nu: nu[e],
                passed: gaps.iter().all(|g| g.value <= bound),
                gaps,
                bound,
                mean_passed: mean_gap_l4.value <= rho_values[e],
                mean_gap_l4,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagReport {
    pub lag: f64,
    pub kappa: usize,
    pub lag_used: f64,
    /// Oracle `K(u)` at the requested lag, row-major.
    pub oracle: Option<Vec<f64>>,
    pub l2_error_y: Option<LpError>,
    pub l2_error_x: Option<LpError>,
    pub l2_gap: LpError,
    pub bound_unobservable: Option<f64>,
    pub bound_observable: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub oracle: Option<Vec<f64>>,
    pub l2_error_x: Option<LpError>,
    pub l4_error_x: Option<LpError>,
    pub l2_error_y: Option<LpError>,
    pub l4_error_y: Option<LpError>,
    pub l4_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStats {
    pub name: String,
    pub truth: Option<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// `sqrt(mean (theta_hat - theta)^2) / |theta|`.
    pub relative_rmse: Option<f64>,
    /// Share of all replications whose estimate lies within 10% of the truth.
    pub within_10pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub parameters: Vec<ParameterStats>,
    /// Replications where the moments fell outside the model range.
    pub failures: usize,
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub eps: f64,
    pub rho: f64,
    /// Mean over replications of the sample `L^4` distance between `Y` and `X`.
    pub measured_rho: f64,
    pub n_obs: usize,
    pub big_delta: f64,
    pub stride: usize,
    pub fine_delta: f64,
    pub span: f64,
    pub lags: Vec<LagReport>,
    pub mean: MeanReport,
    pub estimation: Option<EstimationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    /// Hidden-estimator `L^2` error vs `N`, per lag.
    pub k_x_vs_n: Vec<Option<SlopeFit>>,
    /// Observable-estimator `L^2` error vs `rho`, per lag.
    pub k_y_vs_rho: Vec<Option<SlopeFit>>,
    /// Paired gap vs `rho`, per lag.
    pub gap_vs_rho: Vec<Option<SlopeFit>>,
    /// Hidden mean error vs `N Delta`.
    pub mean_l2_vs_span: Option<SlopeFit>,
    pub mean_l4_vs_span: Option<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub config_hash: String,
    pub replications: usize,
    pub model: String,
    pub points: Vec<PointReport>,
    pub slopes: SlopeReport,
    /// Share of `(eps, lag)` points with the hidden error under its bound.
    pub bound_fraction_unobservable: Option<f64>,
    /// Share of `(eps, lag)` points with the observable error under its bound.
    pub bound_fraction_observable: Option<f64>,
    pub perturbation: Vec<GapCheck>,
    pub checks: Vec<CheckOutcome>,
}

impl ConvergenceReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per `(eps, lag)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "eps,rho,measured_rho,n_obs,big_delta,span,lag,lag_used,l2_error_y,l2_error_x,l2_gap,\
             bound_unobservable,bound_observable,mean_l2_error_x,mean_l4_error_x\n",
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for p in &self.points {
            for l in &p.lags {
                out.push_str(&format!(
                    "{},{},{:e},{},{},{},{},{},{},{},{:e},{},{},{},{}\n",
                    p.eps,
                    p.rho,
                    p.measured_rho,
                    p.n_obs,
                    p.big_delta,
                    p.span,
                    l.lag,
                    l.lag_used,
                    opt(l.l2_error_y.map(|e| e.value)),
                    opt(l.l2_error_x.map(|e| e.value)),
                    l.l2_gap.value,
                    opt(l.bound_unobservable),
                    opt(l.bound_observable),
                    opt(p.mean.l2_error_x.map(|e| e.value)),
                    opt(p.mean.l4_error_x.map(|e| e.value)),
                ));
            }
        }
        out
    }
}

/// Bound constants implied by the config, if any.
pub fn resolve_bounds(config: &ExperimentConfig) -> Result<Option<BoundInputs>> {
    match (&config.bounds, &config.model) {
        (None, _) => Ok(None),
        (Some(BoundsSpec::Explicit(b)), _) => {
            b.validate()?;
            Ok(Some(b.clone()))
        }
        (Some(BoundsSpec::Model), ModelSpec::Ou(p)) => {
            let a = config.lags.iter().copied().fold(0.0, f64::max);
            ou_bound_inputs(p, a).map(Some)
        }
        (Some(BoundsSpec::Model), m) => Err(Error::Config(format!("no analytic bounds for model '{}'", m.name()))),
    }
}

/// `L^4` bound on `Y`: exact for the multiplicative observable, Minkowski otherwise.
pub fn observable_nu(config: &ExperimentConfig, nu_x: f64, rho: f64) -> f64 {
    match config.observable {
        ObservableSpec::Identity => nu_x,
        ObservableSpec::Multiplicative => (1.0 + rho) * nu_x,
        _ => nu_x + rho,
    }
}

fn scalar_oracle(model: &ModelSpec, lag: f64) -> Option<Vec<f64>> {
    model.oracle_covariance(lag).map(|v| vec![v])
}

fn slope_of(points: Vec<(f64, f64)>) -> Option<SlopeFit> {
    fit_rate_slope(&points).ok()
}

pub fn build_report(ensemble: &Ensemble, bounds: Option<&BoundInputs>) -> Result<ConvergenceReport> {
    let cfg = &ensemble.config;
    let model = &cfg.model;
    let n_lags = cfg.lags.len();
    let targets: Option<Vec<Vec<f64>>> = cfg.lags.iter().map(|&u| scalar_oracle(model, u)).collect();
    let (err_y, err_x) = match &targets {
        Some(t) => (
            Some(empirical_lp_error(ensemble, 2, EstimateKind::Observable, t)),
            Some(empirical_lp_error(ensemble, 2, EstimateKind::Hidden, t)),
        ),
        None => (None, None),
    };
    let rhos: Vec<f64> = ensemble.points.iter().map(|p| p.rho).collect();
    let nu_x = model.l4_norm().or(bounds.map(|b| b.nu));
    let nus: Option<Vec<f64>> = nu_x.map(|v| rhos.iter().map(|&r| observable_nu(cfg, v, r)).collect());
    let perturbation = match &nus {
        Some(nu) => perturbation_gap_check(ensemble, nu, &rhos)?,
        None => {
            // Gaps are still reported; the bound is unknown.
            perturbation_gap_check(ensemble, &vec![f64::NAN; rhos.len()], &rhos)?
        }
    };
    let family_c = cfg.scheme.n_cube_root_constant();
    let oracle_mean = model.oracle_mean().map(|m| vec![m; model.dim()]);

    let mut points = Vec::with_capacity(ensemble.points.len());
    for (e, pt) in ensemble.points.iter().enumerate() {
        let recs = ensemble.records_at(e);
        let lags: Vec<LagReport> = (0..n_lags)
            .map(|l| LagReport {
                lag: cfg.lags[l],
                kappa: pt.kappas[l],
                lag_used: pt.lags_used[l],
                oracle: targets.as_ref().map(|t| t[l].clone()),
                l2_error_y: err_y.as_ref().map(|v| v[e][l]),
                l2_error_x: err_x.as_ref().map(|v| v[e][l]),
                l2_gap: perturbation[e].gaps[l],
                bound_unobservable: bounds.map(|b| error_bound_unobservable(b, &pt.scheme)),
                bound_observable: match (bounds, family_c, &nus) {
                    (Some(b), Some(c), Some(nu)) => {
                        let b = BoundInputs { nu: nu[e], ..b.clone() };
                        error_bound_observable(&b, &pt.scheme, pt.rho, c).ok()
                    }
                    _ => None,
                },
            })
            .collect();
        let mean_err = |pick: fn(&super::engine::ReplicationRecord) -> &Vec<f64>, p: u32| {
            oracle_mean.as_ref().map(|m| {
                let s: Vec<f64> = recs.iter().map(|r| sup_norm(&diff(pick(r), m))).collect();
                lp_norm(&s, p)
            })
        };
        let mean = MeanReport {
            oracle: oracle_mean.clone(),
            l2_error_x: mean_err(|r| &r.mean_x, 2),
            l4_error_x: mean_err(|r| &r.mean_x, 4),
            l2_error_y: mean_err(|r| &r.mean_y, 2),
            l4_error_y: mean_err(|r| &r.mean_y, 4),
            l4_bound: bounds.map(|b| mean_error_bound(b, &pt.scheme)),
        };
        let estimation = cfg.estimation.as_ref().map(|est| {
            let truth = true_parameters(model, est.estimator);
            let ok: Vec<&Vec<f64>> = recs.iter().filter_map(|r| r.theta.as_ref()).collect();
            let total = recs.len() as f64;
            let parameters = ensemble
                .parameter_names
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    let vals: Vec<f64> = ok.iter().map(|t| t[k]).collect();
                    let n = vals.len() as f64;
                    let mean = vals.iter().sum::<f64>() / n;
                    let std_dev = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                    let t = truth.as_ref().map(|t| t[k]);
                    ParameterStats {
                        name: name.clone(),
                        truth: t,
                        mean,
                        std_dev,
                        relative_rmse: t.map(|t| {
                            (vals.iter().map(|v| (v - t).powi(2)).sum::<f64>() / n).sqrt() / t.abs()
                        }),
                        within_10pct: t.map(|t| {
                            vals.iter().filter(|v| ((*v - t) / t).abs() <= 0.1).count() as f64 / total
                        }),
                    }
                })
                .collect();
            EstimationReport {
                parameters,
                failures: recs.iter().filter(|r| r.estimation_error.is_some()).count(),
                truncated: recs.iter().filter(|r| r.truncated).count(),
            }
        });
        points.push(PointReport {
            eps: pt.eps,
            rho: pt.rho,
            measured_rho: recs.iter().map(|r| r.measured_rho).sum::<f64>() / recs.len() as f64,
            n_obs: pt.scheme.n_obs,
            big_delta: pt.scheme.big_delta,
            stride: pt.scheme.stride,
            fine_delta: pt.fine_delta,
            span: pt.scheme.span(),
            lags,
            mean,
            estimation,
        });
    }

    let per_lag = |f: &dyn Fn(&PointReport, &LagReport) -> Option<(f64, f64)>| -> Vec<Option<SlopeFit>> {
        (0..n_lags)
            .map(|l| {
                let pts: Option<Vec<(f64, f64)>> = points.iter().map(|p| f(p, &p.lags[l])).collect();
                pts.and_then(slope_of)
            })
            .collect()
    };
    let slopes = SlopeReport {
        k_x_vs_n: per_lag(&|p, l| l.l2_error_x.map(|e| (p.n_obs as f64, e.value))),
        k_y_vs_rho: per_lag(&|p, l| l.l2_error_y.map(|e| (p.rho, e.value))),
        gap_vs_rho: per_lag(&|p, l| Some((p.rho, l.l2_gap.value))),
        mean_l2_vs_span: points
            .iter()
            .map(|p| p.mean.l2_error_x.map(|e| (p.span, e.value)))
            .collect::<Option<Vec<_>>>()
            .and_then(slope_of),
        mean_l4_vs_span: points
            .iter()
            .map(|p| p.mean.l4_error_x.map(|e| (p.span, e.value)))
            .collect::<Option<Vec<_>>>()
            .and_then(slope_of),
    };
    let fraction = |pick: &dyn Fn(&LagReport) -> Option<(f64, f64)>| -> Option<f64> {
        let pairs: Option<Vec<(f64, f64)>> = points.iter().flat_map(|p| p.lags.iter().map(pick)).collect();
        pairs.map(|v| v.iter().filter(|(err, b)| err <= b).count() as f64 / v.len() as f64)
    };
    let bound_fraction_unobservable =
        fraction(&|l| Some((l.l2_error_x?.value, l.bound_unobservable?)));
    let bound_fraction_observable = fraction(&|l| Some((l.l2_error_y?.value, l.bound_observable?)));

    let mut report = ConvergenceReport {
        name: cfg.name.clone(),
        config_hash: ensemble.config_hash.clone(),
        replications: cfg.replications,
        model: model.name().to_string(),
        points,
        slopes,
        bound_fraction_unobservable,
        bound_fraction_observable,
        perturbation,
        checks: Vec::new(),
    };
    report.checks = cfg.checks.iter().map(|c| evaluate_check(c, &report)).collect();
    Ok(report)
}

fn in_range(v: f64, min: f64, max: f64) -> bool {
    v >= min && v <= max
}

fn slope_check(name: &str, fits: &[Option<SlopeFit>], lags: &[f64], min: f64, max: f64) -> CheckOutcome {
    let mut passed = !fits.is_empty();
    let mut parts = Vec::new();
    for (fit, lag) in fits.iter().zip(lags) {
        match fit {
            Some(f) => {
                passed &= in_range(f.slope, min, max);
                parts.push(format!("u={lag}: {:.4}", f.slope));
            }
            None => {
                passed = false;
                parts.push(format!("u={lag}: no fit"));
            }
        }
    }
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail: format!("{} in [{min}, {max}]", parts.join(", ")),
    }
}

/// Evaluates one named threshold against a finished report.
pub fn evaluate_check(check: &CheckSpec, r: &ConvergenceReport) -> CheckOutcome {
    let lags: Vec<f64> = r.points.first().map(|p| p.lags.iter().map(|l| l.lag).collect()).unwrap_or_default();
    let fail = |name: &str, detail: String| CheckOutcome {
        name: name.into(),
        passed: false,
        detail,
    };
    match check {
        CheckSpec::SlopeKXVsN { min, max } => slope_check("slope_k_x_vs_n", &r.slopes.k_x_vs_n, &lags, *min, *max),
        CheckSpec::SlopeKYVsRho { min, max } => {
            slope_check("slope_k_y_vs_rho", &r.slopes.k_y_vs_rho, &lags, *min, *max)
        }
        CheckSpec::SlopeGapVsRho { min, max } => {
            slope_check("slope_gap_vs_rho", &r.slopes.gap_vs_rho, &lags, *min, *max)
        }
        CheckSpec::SlopeMeanVsSpan { p, min, max } => {
            let name = format!("slope_mean_l{p}_vs_span");
            let fit = match p {
                2 => r.slopes.mean_l2_vs_span,
                4 => r.slopes.mean_l4_vs_span,
                _ => return fail(&name, format!("p = {p} is not 2 or 4")),
            };
            match fit {
                Some(f) => CheckOutcome {
                    passed: in_range(f.slope, *min, *max),
                    detail: format!("{:.4} in [{min}, {max}]", f.slope),
                    name,
                },
                None => fail(&name, "no fit".into()),
            }
        }
        CheckSpec::BoundFraction { min } => match r.bound_fraction_unobservable {
            Some(f) => CheckOutcome {
                name: "bound_fraction".into(),
                passed: f >= *min,
                detail: format!("{f:.3} >= {min}"),
            },
            None => fail("bound_fraction", "no bound available".into()),
        },
        CheckSpec::GapWithinBound => {
            let worst = r
                .perturbation
                .iter()
                .map(|g| g.gaps.iter().map(|x| x.value).fold(0.0, f64::max) / g.bound)
                .fold(0.0, f64::max);
            CheckOutcome {
                name: "gap_within_bound".into(),
                passed: r.perturbation.iter().all(|g| g.passed),
                detail: format!("largest gap / (4 nu rho) = {worst:.4}"),
            }
        }
        CheckSpec::MeanGapWithinRho => CheckOutcome {
            name: "mean_gap_within_rho".into(),
            passed: r.perturbation.iter().all(|g| g.mean_passed),
            detail: r
                .perturbation
                .iter()
                .map(|g| format!("{:.3e} <= {}", g.mean_gap_l4.value, g.rho))
                .collect::<Vec<_>>()
                .join(", "),
        },
        CheckSpec::ErrorOverRhoBand { max_ratio } => {
            let mut passed = true;
            let mut parts = Vec::new();
            for (l, lag) in lags.iter().enumerate() {
                let ratios: Option<Vec<f64>> = r
                    .points
                    .iter()
                    .map(|p| p.lags[l].l2_error_y.map(|e| e.value / p.rho))
                    .collect();
                match ratios {
                    Some(v) => {
                        let hi = v.iter().copied().fold(f64::MIN, f64::max);
                        let lo = v.iter().copied().fold(f64::MAX, f64::min);
                        passed &= hi / lo <= *max_ratio;
                        parts.push(format!("u={lag}: {:.3}", hi / lo));
                    }
                    None => {
                        passed = false;
                        parts.push(format!("u={lag}: no oracle"));
                    }
                }
            }
            CheckOutcome {
                name: "error_over_rho_band".into(),
                passed,
                detail: format!("max/min ratio {} <= {max_ratio}", parts.join(", ")),
            }
        }
        CheckSpec::EstimationWithin { min_fraction } => {
            let name = "estimation_within_10pct";
            let Some(est) = r.points.last().and_then(|p| p.estimation.as_ref()) else {
                return fail(name, "no estimation".into());
            };
            let mut passed = true;
            let mut parts = Vec::new();
            for p in &est.parameters {
                let f = p.within_10pct.unwrap_or(0.0);
                passed &= f >= *min_fraction;
                parts.push(format!("{}: {f:.3}", p.name));
            }
            CheckOutcome {
                name: name.into(),
                passed,
                detail: format!("{} >= {min_fraction}", parts.join(", ")),
            }
        }
        CheckSpec::EstimationRmse { parameter, max_relative } => {
            let name = format!("estimation_rmse_{parameter}");
            let stat = r
                .points
                .last()
                .and_then(|p| p.estimation.as_ref())
                .and_then(|e| e.parameters.iter().find(|p| &p.name == parameter))
                .and_then(|p| p.relative_rmse);
            match stat {
                Some(v) => CheckOutcome {
                    passed: v <= *max_relative,
                    detail: format!("{v:.4} <= {max_relative}"),
                    name,
                },
                None => fail(&name, format!("no estimate of '{parameter}'")),
            }
        }
        CheckSpec::EstimationRmseNonIncreasing { from_index } => {
            let name = "estimation_rmse_non_increasing";
            let pts = &r.points[(*from_index).min(r.points.len())..];
            let Some(first) = pts.first().and_then(|p| p.estimation.as_ref()) else {
                return fail(name, "no estimation".into());
            };
            let mut passed = pts.len() >= 2;
            let mut parts = Vec::new();
            for k in 0..first.parameters.len() {
                let series: Vec<f64> = pts
                    .iter()
                    .map(|p| p.estimation.as_ref().and_then(|e| e.parameters[k].relative_rmse).unwrap_or(f64::NAN))
                    .collect();
                passed &= series.windows(2).all(|w| w[1] <= w[0]);
                parts.push(format!(
                    "{}: {}",
                    first.parameters[k].name,
                    series.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" -> ")
                ));
            }
            CheckOutcome {
                name: name.into(),
                passed,
                detail: parts.join("; "),
            }
        }
    }
}
