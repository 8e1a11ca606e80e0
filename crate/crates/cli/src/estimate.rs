use std::path::PathBuf;

use clap::{Args, ValueEnum};
use indobs::estimators::{covariance_curve, lag_index, LagRequest, LaggedCovarianceEstimate};
use indobs::inversion::{
    extract_moment_vector, invert_cir, invert_least_squares, invert_ou, truncate_to_ball, CirMomentMap,
    LeastSquaresOptions, MomentDescriptor, MomentMap, OuMomentMap, ParameterBall, ParameterEstimate,
};
use indobs::scheduler::{optimized_scheme, scheme_from_n};
use indobs::trajectory_io::read_trajectory;
use indobs::{subsample_view, Error, SubsamplingScheme, TrajectoryGrid};
use serde::Serialize;

use crate::manifest::{manifest_path_for, RunManifest};
use crate::{exit, CliError, CliResult, GlobalArgs};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Ou,
    Cir,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Solver {
    ClosedForm,
    LeastSquares,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Trajectory file (.csv or binary).
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Lags (time units) of the reported covariance table, comma separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    lags: Vec<f64>,
    /// Number of observations; Delta = c_delta N^(-1/3) unless --big-delta is given.
    #[arg(long, conflicts_with = "rho")]
    n_obs: Option<usize>,
    /// Approximation speed; N = ceil(c_n rho^-3), Delta = c_delta rho.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c_n: f64,
    #[arg(long, default_value_t = 1.0)]
    c_delta: f64,
    /// Explicit observation step, with --n-obs.
    #[arg(long, requires = "n_obs")]
    big_delta: Option<f64>,
    /// Positive lag of the moment vector.
    #[arg(long, default_value_t = 1.0)]
    u1: f64,
    /// Coordinate of a multivariate trajectory to use.
    #[arg(long, default_value_t = 0)]
    coordinate: usize,
    #[arg(long, value_enum, default_value = "closed-form")]
    solver: Solver,
    /// Parameter ball centre (comma separated); truncation and least-squares domain.
    #[arg(long, value_delimiter = ',', requires = "ball_radius")]
    ball_center: Option<Vec<f64>>,
    #[arg(long, requires = "ball_center")]
    ball_radius: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EstimateOutput {
    trajectory: PathBuf,
    model: ModelKind,
    solver: Solver,
    scheme: SubsamplingScheme,
    descriptors: Vec<MomentDescriptor>,
    covariances: Vec<LaggedCovarianceEstimate>,
    estimate: ParameterEstimate,
    converged: bool,
}

fn pick_scheme(args: &EstimateArgs, fine_delta: f64) -> CliResult<SubsamplingScheme> {
    let unbound = match (args.n_obs, args.rho) {
        (Some(n), None) => match args.big_delta {
            Some(d) => SubsamplingScheme::unbound(n, d)?,
            None => scheme_from_n(n, args.c_delta)?,
        },
        (None, Some(rho)) => optimized_scheme(rho, args.c_n, args.c_delta)?,
        _ => return Err(CliError::Usage("give exactly one of --n-obs or --rho".into())),
    };
    Ok(unbound.bind(fine_delta)?)
}

pub fn run(global: &GlobalArgs, args: EstimateArgs) -> CliResult {
    let manifest = RunManifest::start("estimate");
    if args.lags.is_empty() {
        return Err(CliError::Usage("--lags must list at least one lag".into()));
    }
    let lags: Vec<LagRequest> = args.lags.iter().map(|&u| LagRequest::new(u)).collect::<Result<_, _>>()?;
    let grid = read_trajectory(&args.trajectory)?;
    if args.coordinate >= grid.dim() {
        return Err(Error::ParameterDomain(format!(
            "coordinate {} but the trajectory has dimension {}",
            args.coordinate,
            grid.dim()
        ))
        .into());
    }
    let series = TrajectoryGrid::scalar(grid.delta(), grid.coordinate(args.coordinate))?;
    let scheme = pick_scheme(&args, series.delta())?;
    let kmax = lags
        .iter()
        .map(|l| l.lag_u)
        .chain([args.u1])
        .map(|u| lag_index(u, scheme.big_delta))
        .max()
        .unwrap_or(0);
    let needed = (scheme.n_obs + kmax) * scheme.stride;
    if needed > series.len() {
        return Err(Error::InsufficientData {
            required: needed,
            available: series.len(),
        }
        .into());
    }
    let view = subsample_view(&series, &scheme.with_n_obs(scheme.n_obs + kmax), 0)?;
    let covariances = covariance_curve(&view, &scheme, &lags)?;
    let descriptors = MomentDescriptor::default_set(args.u1);
    let psi = extract_moment_vector(&view, &scheme, &descriptors)?;

    let ball = match (&args.ball_center, args.ball_radius) {
        (Some(c), Some(r)) => Some(ParameterBall::new(c.clone(), r)?),
        _ => None,
    };
    let (estimate, converged) = match args.solver {
        Solver::ClosedForm => {
            let est = match args.model {
                ModelKind::Ou => invert_ou(&psi, args.u1)?,
                ModelKind::Cir => invert_cir(&psi, args.u1)?,
            };
            (est, true)
        }
        Solver::LeastSquares => {
            let Some(ball) = &ball else {
                return Err(CliError::Usage("--solver least-squares needs --ball-center and --ball-radius".into()));
            };
            let (ou, cir) = (OuMomentMap { u1: args.u1 }, CirMomentMap { u1: args.u1 });
            let map: &dyn MomentMap = match args.model {
                ModelKind::Ou => &ou,
                ModelKind::Cir => &cir,
            };
            match invert_least_squares(map, &psi, &ball.center, ball, LeastSquaresOptions::default()) {
                Ok(est) => (est, true),
                // Reported with the flag cleared rather than dropped.
                Err(Error::SolverDidNotConverge { estimate }) => (*estimate, false),
                Err(e) => return Err(e.into()),
            }
        }
    };
    let estimate = match &ball {
        Some(b) => truncate_to_ball(estimate, b),
        None => estimate,
    };
    let out = EstimateOutput {
        trajectory: args.trajectory.clone(),
        model: args.model,
        solver: args.solver,
        scheme,
        descriptors,
        covariances,
        estimate,
        converged,
    };
    let json = serde_json::to_string_pretty(&out).expect("estimate serializes") + "\n";
    match &global.output {
        Some(path) => {
            std::fs::write(path, &json)?;
            let mut m = manifest;
            m.outputs = vec![path.clone()];
            m.write(&manifest_path_for(path))?;
        }
        None => print!("{json}"),
    }
    Ok(if converged { exit::OK } else { exit::NUMERICAL })
}
