//! Monte Carlo convergence lab: replicated simulation of `(X, Y^eps)` pairs,
//! `L^p` error measurement, rate fitting and bound comparison.

pub mod config;
pub mod engine;
pub mod persist;
pub mod presets;
pub mod probe;
pub mod report;

pub use config::{
    BoundsSpec, CheckSpec, CustomScheme, EstimationSpec, Estimator, ExperimentConfig, ObservableSpec, RhoSpec,
    SchemeFamily,
};
pub use engine::{plan_points, run_replication, run_replications, Ensemble, EpsilonPoint, ReplicationRecord};
pub use persist::{decode_ensemble, encode_ensemble, read_ensemble, write_ensemble};
pub use presets::{preset, preset_names};
pub use probe::{decorrelation_probe, decorrelation_probe_path, ProbeTable, DEFAULT_OFFSETS};
pub use report::{
    build_report, empirical_lp_error, fit_rate_slope, lp_norm, perturbation_gap_check, resolve_bounds,
    CheckOutcome, ConvergenceReport, EstimateKind, LpError, SlopeFit,
};
