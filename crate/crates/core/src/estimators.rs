//! Sub-sampled empirical moments: lag discretization, means and lagged covariances.
//!
//! The input is always the already sub-sampled sequence `s_1, s_2, ...` with
//! spacing `Delta`; observable and hidden data go through the same code.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{SampleView, SubsamplingScheme};

/// Sums of at least this many terms use compensated accumulation.
pub const COMPENSATION_THRESHOLD: usize = 100_000;

/// A lag `u >= 0` in time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LagRequest {
    pub lag_u: f64,
}

impl LagRequest {
    pub fn new(lag_u: f64) -> Result<Self> {
        if !(lag_u >= 0.0 && lag_u.is_finite()) {
            return Err(Error::ParameterDomain(format!("lag must be finite and >= 0, got {lag_u}")));
        }
        Ok(Self { lag_u })
    }
}

/// Closest integer to `lag_u / big_delta`, ties to even.
pub fn lag_index(lag_u: f64, big_delta: f64) -> usize {
    if lag_u == 0.0 {
        return 0;
    }
    (lag_u / big_delta).round_ties_even() as usize
}

/// Neumaier-compensated running sum; plain summation when disabled.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accumulator {
    sum: f64,
    comp: f64,
    compensated: bool,
}

impl Accumulator {
    pub(crate) fn new(compensated: bool) -> Self {
        Self {
            sum: 0.0,
            comp: 0.0,
            compensated,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        if self.compensated {
            let t = self.sum + v;
            if self.sum.abs() >= v.abs() {
                self.comp += (self.sum - t) + v;
            } else {
                self.comp += (v - t) + self.sum;
            }
            self.sum = t;
        } else {
            self.sum += v;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Empirical mean and its time-shifted version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub vector: Vec<f64>,
    pub shifted_vector: Vec<f64>,
    pub n_obs: usize,
    pub big_delta: f64,
    pub kappa: usize,
}

fn check_len(samples: &SampleView, n_obs: usize, kappa: usize) -> Result<()> {
    if n_obs == 0 {
        return Err(Error::ParameterDomain("n_obs must be positive".into()));
    }
    let required = n_obs + kappa;
    if samples.len() < required {
        return Err(Error::InsufficientData {
            required,
            available: samples.len(),
        });
    }
    Ok(())
}

fn window_mean(samples: &SampleView, start: usize, n_obs: usize) -> Vec<f64> {
    let r = samples.dim();
    let compensated = n_obs >= COMPENSATION_THRESHOLD;
    let mut acc = vec![Accumulator::new(compensated); r];
    for n in start..start + n_obs {
        for (a, v) in acc.iter_mut().zip(samples.get(n)) {
            a.add(*v);
        }
    }
    acc.iter().map(|a| a.value() / n_obs as f64).collect()
}

/// `(1/N) sum_{n=1..N} s_n` and `(1/N) sum_{n=1..N} s_{n+kappa}`.
pub fn empirical_mean(
    samples: &SampleView,
    n_obs: usize,
    kappa: usize,
    big_delta: f64,
) -> Result<MeanEstimate> {
    check_len(samples, n_obs, kappa)?;
    let vector = window_mean(samples, 0, n_obs);
    let shifted_vector = if kappa == 0 {
        vector.clone()
    } else {
        window_mean(samples, kappa, n_obs)
    };
    Ok(MeanEstimate {
        vector,
        shifted_vector,
        n_obs,
        big_delta,
        kappa,
    })
}

/// An `r x r` lagged covariance estimate (row-major) with its discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaggedCovarianceEstimate {
    pub dim: usize,
    pub matrix: Vec<f64>,
    pub lag_requested: f64,
    pub kappa: usize,
    pub lag_used: f64,
    pub n_obs: usize,
    pub big_delta: f64,
}

impl LaggedCovarianceEstimate {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    pub fn csv_header(dim: usize) -> String {
        let mut h = String::from("lag_requested,lag_used,n_obs,big_delta");
        for i in 1..=dim {
            for j in 1..=dim {
                h.push_str(&format!(",k{i}_{j}"));
            }
        }
        h
    }

    /// `lag_requested, lag_used, N, Delta`, then the matrix row-major.
    pub fn csv_row(&self) -> String {
        let mut row = format!(
            "{},{},{},{}",
            self.lag_requested, self.lag_used, self.n_obs, self.big_delta
        );
        for v in &self.matrix {
            row.push_str(&format!(",{v}"));
        }
        row
    }
}

/// `sup_{i,j} |M_ij|`.
pub fn sup_norm(matrix: &[f64]) -> f64 {
    matrix.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn check_cov(samples: &SampleView, n_obs: usize, kappa: usize) -> Result<()> {
    if n_obs < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            available: n_obs,
        });
    }
    check_len(samples, n_obs, kappa)?;
    if n_obs < 10 * kappa {
        return Err(Error::SchemeTooShortForLag { n_obs, kappa });
    }
    Ok(())
}

fn centered_product(samples: &SampleView, n_obs: usize, kappa: usize, mean: &MeanEstimate) -> Vec<f64> {
    let r = samples.dim();
    let compensated = n_obs >= COMPENSATION_THRESHOLD;
    let mut acc = vec![Accumulator::new(compensated); r * r];
    let (m, ms) = (&mean.vector, &mean.shifted_vector);
    if r == 1 {
        let a = &mut acc[0];
        for n in 0..n_obs {
            a.add((samples.value(n, 0) - m[0]) * (samples.value(n + kappa, 0) - ms[0]));
        }
    } else {
        for n in 0..n_obs {
            let x = samples.get(n);
            let y = samples.get(n + kappa);
            for i in 0..r {
                let xi = x[i] - m[i];
                for j in 0..r {
                    acc[i * r + j].add(xi * (y[j] - ms[j]));
                }
            }
        }
    }
    acc.iter().map(|a| a.value() / n_obs as f64).collect()
}

/// `(1/N) sum (s_n - mean)(s_{n+kappa} - shifted_mean)^T`, which equals
/// `(1/N) sum s_n s_{n+kappa}^T - mean shifted_mean^T`.
pub fn lagged_covariance(
    samples: &SampleView,
    n_obs: usize,
    kappa: usize,
    big_delta: f64,
    lag_u: f64,
) -> Result<LaggedCovarianceEstimate> {
    check_cov(samples, n_obs, kappa)?;
    let mean = empirical_mean(samples, n_obs, kappa, big_delta)?;
    Ok(covariance_with_mean(samples, n_obs, kappa, big_delta, lag_u, &mean))
}

fn covariance_with_mean(
    samples: &SampleView,
    n_obs: usize,
    kappa: usize,
    big_delta: f64,
    lag_u: f64,
    mean: &MeanEstimate,
) -> LaggedCovarianceEstimate {
    LaggedCovarianceEstimate {
        dim: samples.dim(),
        matrix: centered_product(samples, n_obs, kappa, mean),
        lag_requested: lag_u,
        kappa,
        lag_used: kappa as f64 * big_delta,
        n_obs,
        big_delta,
    }
}

/// Product-minus-means form; kept to cross-check the centered form.
pub fn lagged_covariance_raw_form(samples: &SampleView, n_obs: usize, kappa: usize) -> Result<Vec<f64>> {
    check_cov(samples, n_obs, kappa)?;
    let r = samples.dim();
    let mean = empirical_mean(samples, n_obs, kappa, 1.0)?;
    let compensated = n_obs >= COMPENSATION_THRESHOLD;
    let mut acc = vec![Accumulator::new(compensated); r * r];
    for n in 0..n_obs {
        let x = samples.get(n);
        let y = samples.get(n + kappa);
        for i in 0..r {
            for j in 0..r {
                acc[i * r + j].add(x[i] * y[j]);
            }
        }
    }
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        for j in 0..r {
            out.push(acc[i * r + j].value() / n_obs as f64 - mean.vector[i] * mean.shifted_vector[j]);
        }
    }
    Ok(out)
}

/// One estimate per lag under `scheme`; means are computed once per distinct `kappa`.
pub fn covariance_curve(
    samples: &SampleView,
    scheme: &SubsamplingScheme,
    lags: &[LagRequest],
) -> Result<Vec<LaggedCovarianceEstimate>> {
    let n = scheme.n_obs;
    let d = scheme.big_delta;
    let mut means: BTreeMap<usize, MeanEstimate> = BTreeMap::new();
    let mut cache: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut out = Vec::with_capacity(lags.len());
    for lag in lags {
        let kappa = lag_index(lag.lag_u, d);
        check_cov(samples, n, kappa)?;
        if !means.contains_key(&kappa) {
            means.insert(kappa, empirical_mean(samples, n, kappa, d)?);
        }
        let mean = &means[&kappa];
        let matrix = cache
            .entry(kappa)
            .or_insert_with(|| centered_product(samples, n, kappa, mean))
            .clone();
        out.push(LaggedCovarianceEstimate {
            dim: samples.dim(),
            matrix,
            lag_requested: lag.lag_u,
            kappa,
            lag_used: kappa as f64 * d,
            n_obs: n,
            big_delta: d,
        });
    }
    Ok(out)
}
