//! Replication engine: one task per `(eps, replication)`, run in parallel and
//! reduced in index order so the ensemble does not depend on scheduling.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Estimator, ExperimentConfig, ObservableSpec, SchemeFamily};
use crate::error::{Error, Result};
use crate::estimators::{covariance_curve, empirical_mean, lag_index, LagRequest};
use crate::inversion::{extract_moment_vector, invert_cir, invert_ou, truncate_to_ball, MomentDescriptor};
use crate::models::{
    default_realized_window, multiplicative_perturbation_observable, realized_volatility_observable,
    smoothing_observable, ModelSpec, SimulatedPaths,
};
use crate::rng::{RandomStreamSpec, StreamRole};
use crate::scheduler::{optimized_scheme, scheme_from_n};
use crate::trajectory::{subsample_view, SampleView, SubsamplingScheme, TrajectoryGrid};

/// Resolved simulation plan for one epsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPoint {
    pub eps: f64,
    pub rho: f64,
    /// Scheme bound to the fine grid.
    pub scheme: SubsamplingScheme,
    pub fine_delta: f64,
    /// Leading fine samples consumed by the observable window.
    pub lead: usize,
    pub burn_in: usize,
    /// Fine steps simulated per replication (after burn-in).
    pub fine_length: usize,
    pub kappas: Vec<usize>,
    /// Largest lag index over the lags and the estimation lag.
    pub kappa_max: usize,
    pub lags_used: Vec<f64>,
}

/// Everything one replication produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub eps_index: usize,
    pub replication: usize,
    /// Per lag, row-major `r x r`.
    pub k_y: Vec<Vec<f64>>,
    pub k_x: Vec<Vec<f64>>,
    pub mean_y: Vec<f64>,
    pub mean_x: Vec<f64>,
    /// Sample `L^4` distance between `Y` and `X` on the sub-sampled points.
    pub measured_rho: f64,
    pub theta: Option<Vec<f64>>,
    pub truncated: bool,
    /// Why the inverse was not applicable (moments outside the model range).
    pub estimation_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub points: Vec<EpsilonPoint>,
    pub parameter_names: Vec<String>,
    /// Ordered by `(eps_index, replication)`.
    pub records: Vec<ReplicationRecord>,
}

impl Ensemble {
    pub fn records_at(&self, eps_index: usize) -> &[ReplicationRecord] {
        let m = self.config.replications;
        &self.records[eps_index * m..(eps_index + 1) * m]
    }
}

/// Model used at one epsilon; slow-fast systems take `eps` as their scale.
pub fn model_at(config: &ExperimentConfig, eps: f64) -> ModelSpec {
    match (&config.model, &config.observable) {
        (ModelSpec::SlowFast(p), ObservableSpec::SlowFast) => {
            let mut p = p.clone();
            p.scale = eps;
            ModelSpec::SlowFast(p)
        }
        (m, _) => m.clone(),
    }
}

/// Parameter names produced by the configured estimator.
pub fn parameter_names(estimator: Estimator) -> Vec<String> {
    let list: &[&str] = match estimator {
        Estimator::Ou => &["mean", "reversion", "noise"],
        Estimator::Cir => &["vol_reversion", "vol_mean", "vol_of_vol"],
    };
    list.iter().map(|s| s.to_string()).collect()
}

/// True parameter vector in the estimator's order, when the model defines one.
pub fn true_parameters(model: &ModelSpec, estimator: Estimator) -> Option<Vec<f64>> {
    match (model, estimator) {
        (ModelSpec::Ou(p), Estimator::Ou) => Some(vec![p.mean, p.reversion, p.noise]),
        (ModelSpec::SlowFast(p), Estimator::Ou) => {
            let q = p.catalog.reduced_ou();
            Some(vec![q.mean, q.reversion, q.noise])
        }
        (ModelSpec::Heston(p), Estimator::Cir) => Some(vec![p.vol_reversion, p.vol_mean, p.vol_of_vol]),
        _ => None,
    }
}

fn unbound_scheme(config: &ExperimentConfig, index: usize, rho: f64) -> Result<SubsamplingScheme> {
    match &config.scheme {
        SchemeFamily::FromRho { c_n, c_delta } => optimized_scheme(rho, *c_n, *c_delta),
        SchemeFamily::FromN { c_delta, n_obs } => scheme_from_n(n_obs[index], *c_delta),
        SchemeFamily::Custom { schemes } => SubsamplingScheme::unbound(schemes[index].n_obs, schemes[index].big_delta),
    }
}

fn fine_delta_for(config: &ExperimentConfig, eps: f64, big_delta: f64) -> f64 {
    let res = config.stride_resolution as f64;
    match config.observable {
        // Returns are sampled at the observation step eps.
        ObservableSpec::RealizedVolatility { .. } => eps,
        // eps must be a whole number of fine steps.
        ObservableSpec::Smoothing => eps / (eps * res / big_delta).round().max(1.0),
        // The fast variable needs delta well below eps.
        ObservableSpec::SlowFast => (big_delta / res).min(eps / 10.0),
        _ => big_delta / res,
    }
}

fn lead_for(config: &ExperimentConfig, eps: f64, fine_delta: f64) -> usize {
    match config.observable {
        ObservableSpec::RealizedVolatility { window_scale } => default_realized_window(eps, window_scale),
        ObservableSpec::Smoothing => (eps / fine_delta).round() as usize,
        _ => 0,
    }
}

/// Resolves scheme, fine step and path length for every epsilon.
pub fn plan_points(config: &ExperimentConfig) -> Result<Vec<EpsilonPoint>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.epsilon_grid.len());
    for (e, &eps) in config.epsilon_grid.iter().enumerate() {
        let ctx = |err: Error| err.with_context(format!("eps = {eps}"));
        let rho = config.rho.eval(eps, e);
        let unbound = unbound_scheme(config, e, rho).map_err(ctx)?;
        let fine_delta = fine_delta_for(config, eps, unbound.big_delta);
        let scheme = unbound.bind(fine_delta).map_err(ctx)?;
        let kappas: Vec<usize> = config.lags.iter().map(|&u| lag_index(u, scheme.big_delta)).collect();
        let mut kmax = kappas.iter().copied().max().unwrap_or(0);
        if let Some(est) = &config.estimation {
            kmax = kmax.max(lag_index(est.u1, scheme.big_delta));
        }
        if scheme.n_obs < 10 * kmax {
            return Err(ctx(Error::SchemeTooShortForLag {
                n_obs: scheme.n_obs,
                kappa: kmax,
            }));
        }
        let lead = lead_for(config, eps, fine_delta);
        let model = model_at(config, eps);
        let burn_in = config.burn_in.unwrap_or_else(|| model.default_burn_in(fine_delta));
        let fine_length = lead + (scheme.n_obs + kmax) * scheme.stride;
        let lags_used = kappas.iter().map(|&k| k as f64 * scheme.big_delta).collect();
        out.push(EpsilonPoint {
            eps,
            rho,
            scheme,
            fine_delta,
            lead,
            burn_in,
            fine_length,
            kappas,
            kappa_max: kmax,
            lags_used,
        });
    }
    Ok(out)
}

/// Peak bytes held by one replication: hidden path, companion, observable and
/// a transient copy during burn-in removal.
pub fn replication_bytes(config: &ExperimentConfig, point: &EpsilonPoint) -> f64 {
    let dim = config.model.dim() as f64;
    4.0 * (point.fine_length + point.burn_in) as f64 * dim * 8.0
}

fn check_memory(config: &ExperimentConfig, points: &[EpsilonPoint], workers: usize) -> Result<()> {
    let peak = points
        .iter()
        .map(|p| replication_bytes(config, p))
        .fold(0.0, f64::max);
    let total = peak * workers.min(config.replications * points.len()).max(1) as f64;
    let cap = config.memory_cap_mb * 1024.0 * 1024.0;
    if total > cap {
        return Err(Error::ResourceLimit(format!(
            "estimated {:.0} MiB with {workers} workers exceeds the cap of {} MiB",
            total / 1024.0 / 1024.0,
            config.memory_cap_mb
        )));
    }
    Ok(())
}

/// Replication index used for the random streams of `(eps_index, m)`.
pub fn stream_index(eps_index: usize, replication: usize) -> u64 {
    ((eps_index as u64) << 32) | replication as u64
}

fn build_observable<'a>(
    config: &ExperimentConfig,
    point: &EpsilonPoint,
    paths: &'a SimulatedPaths,
) -> Result<Cow<'a, TrajectoryGrid>> {
    let missing = |name: &str| Error::ParameterDomain(format!("model has no '{name}' path"));
    Ok(match config.observable {
        ObservableSpec::Identity => Cow::Borrowed(&paths.hidden),
        ObservableSpec::Multiplicative => {
            Cow::Owned(multiplicative_perturbation_observable(&paths.hidden, point.rho)?)
        }
        ObservableSpec::Smoothing => Cow::Owned(smoothing_observable(&paths.hidden, point.eps)?.grid),
        ObservableSpec::RealizedVolatility { .. } => {
            let returns = paths.companion("returns").ok_or_else(|| missing("returns"))?;
            Cow::Owned(realized_volatility_observable(returns, point.eps, point.lead)?.grid)
        }
        ObservableSpec::SlowFast => Cow::Borrowed(paths.companion("slow").ok_or_else(|| missing("slow"))?),
    })
}

fn l4_distance(y: &SampleView, x: &SampleView, n: usize) -> f64 {
    let mut acc = 0.0;
    for t in 0..n {
        let d = y
            .get(t)
            .iter()
            .zip(x.get(t))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        acc += d.powi(4);
    }
    (acc / n as f64).powf(0.25)
}

/// Simulates and estimates a single replication.
pub fn run_replication(
    config: &ExperimentConfig,
    point: &EpsilonPoint,
    eps_index: usize,
    replication: usize,
) -> Result<ReplicationRecord> {
    let model = model_at(config, point.eps);
    let stream = RandomStreamSpec::new(
        config.master_seed,
        stream_index(eps_index, replication),
        StreamRole::ProcessNoise,
    );
    let paths = model.simulate(point.fine_length, point.fine_delta, &stream, Some(point.burn_in))?;
    let y = build_observable(config, point, &paths)?;
    let scheme = point.scheme;
    let ext = scheme.with_n_obs(scheme.n_obs + point.kappa_max);
    // Y sample j sits at hidden index j + lead.
    let y_view = subsample_view(&y, &ext, 0)?;
    let x_view = subsample_view(&paths.hidden, &ext, point.lead)?;
    let lags: Vec<LagRequest> = config.lags.iter().map(|&u| LagRequest::new(u)).collect::<Result<_>>()?;
    let k_y = covariance_curve(&y_view, &scheme, &lags)?;
    let k_x = covariance_curve(&x_view, &scheme, &lags)?;
    let n = scheme.n_obs;
    let mean_y = empirical_mean(&y_view, n, 0, scheme.big_delta)?.vector;
    let mean_x = empirical_mean(&x_view, n, 0, scheme.big_delta)?.vector;
    let measured_rho = l4_distance(&y_view, &x_view, n);

    let (mut theta, mut truncated, mut estimation_error) = (None, false, None);
    if let Some(est) = &config.estimation {
        let psi = extract_moment_vector(&y_view, &scheme, &MomentDescriptor::default_set(est.u1))?;
        let inverted = match est.estimator {
            Estimator::Ou => invert_ou(&psi, est.u1),
            Estimator::Cir => invert_cir(&psi, est.u1),
        };
        match inverted {
            Ok(mut estimate) => {
                if let Some(ball) = &est.ball {
                    estimate = truncate_to_ball(estimate, ball);
                }
                truncated = estimate.truncated;
                theta = Some(estimate.theta);
            }
            Err(Error::MomentsOutsideModelRange(msg)) => estimation_error = Some(msg),
            Err(other) => return Err(other),
        }
    }

    Ok(ReplicationRecord {
        eps_index,
        replication,
        k_y: k_y.into_iter().map(|k| k.matrix).collect(),
        k_x: k_x.into_iter().map(|k| k.matrix).collect(),
        mean_y,
        mean_x,
        measured_rho,
        theta,
        truncated,
        estimation_error,
    })
}

/// Runs every `(eps, replication)` pair on `workers` threads (all available
/// when `None`). The result is a pure function of the config.
pub fn run_replications(config: &ExperimentConfig, workers: Option<usize>) -> Result<Ensemble> {
    let points = plan_points(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::ParameterDomain("workers must be positive".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::ResourceLimit(format!("cannot start worker pool: {e}")))?;
    check_memory(config, &points, pool.current_num_threads())?;

    let m = config.replications;
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|e| (0..m).map(move |r| (e, r))).collect();
    let records = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(e, r)| {
                run_replication(config, &points[e], e, r)
                    .map_err(|err| err.with_context(format!("eps = {}, replication {r}", points[e].eps)))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let parameter_names = config
        .estimation
        .as_ref()
        .map(|est| parameter_names(est.estimator))
        .unwrap_or_default();
    Ok(Ensemble {
        config: config.clone(),
        config_hash: config.hash(),
        points,
        parameter_names,
        records,
    })
}
