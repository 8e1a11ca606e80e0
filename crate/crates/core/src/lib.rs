//! Parameter estimation for indirectly observed stationary processes.
//!
//! A hidden stationary process `X` is only seen through an approximation `Y^eps`
//! with `|Y - X|_4 <= rho(eps)`. The crate provides simulators and observables,
//! sub-sampled moment estimators, optimal sub-sampling schemes with their error
//! bounds, moment-based parameter inversion and a Monte Carlo lab that measures
//! the resulting convergence rates.

pub mod error;
pub mod estimators;
pub mod inversion;
pub mod lab;
pub mod models;
pub mod rng;
pub mod scheduler;
pub mod trajectory;
pub mod trajectory_io;

pub use error::{Error, ErrorClass, Result};
pub use rng::{RandomStreamSpec, StreamRole};
pub use trajectory::{subsample_view, validate_grid, GridValidation, SampleView, SubsamplingScheme, TrajectoryGrid};
