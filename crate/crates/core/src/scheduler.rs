//! Sub-sampling schemes and theoretical error bounds.
//!
//! Similarity relations `N ~ rho^-3`, `Delta ~ rho`, `Delta ~ N^(-1/3)` carry
//! explicit constants `c_n` and `c_delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::OUParams;
use crate::trajectory::SubsamplingScheme;

/// Shape of a decorrelation rate `f(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecorrelationForm {
    /// `c exp(-rate T)`.
    Exponential { c: f64, rate: f64 },
    /// `c (1 + T)^(-exponent)`, `exponent > 1`.
    Power { c: f64, exponent: f64 },
    /// Piecewise-linear through `(times, values)`, constant before the first
    /// point and with an exponential tail through the last two.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

/// A decorrelation rate together with `I(f) = int_1^inf f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationProfile {
    pub form: DecorrelationForm,
    pub integral_i_f: f64,
    /// `int_0^inf f`, reported alongside.
    pub integral_from_zero: f64,
}

impl DecorrelationProfile {
    pub fn exponential(c: f64, rate: f64) -> Result<Self> {
        if !(c > 0.0 && rate > 0.0 && c.is_finite() && rate.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "exponential profile needs c, rate > 0 (got {c}, {rate})"
            )));
        }
        Ok(Self {
            form: DecorrelationForm::Exponential { c, rate },
            integral_i_f: c / rate * (-rate).exp(),
            integral_from_zero: c / rate,
        })
    }

    pub fn power(c: f64, exponent: f64) -> Result<Self> {
        if !(c > 0.0 && exponent > 1.0 && c.is_finite() && exponent.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "power profile needs c > 0 and exponent > 1 (got {c}, {exponent})"
            )));
        }
        Ok(Self {
            form: DecorrelationForm::Power { c, exponent },
            integral_i_f: c * 2f64.powf(1.0 - exponent) / (exponent - 1.0),
            integral_from_zero: c / (exponent - 1.0),
        })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::ParameterDomain(
                "tabulated profile needs at least two (time, value) pairs".into(),
            ));
        }
        for w in times.windows(2) {
            if !(w[0] >= 0.0 && w[1] > w[0] && w[1].is_finite()) {
                return Err(Error::ParameterDomain("profile times must increase from >= 0".into()));
            }
        }
        for w in values.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::ParameterDomain("profile values must strictly decrease".into()));
            }
        }
        if !values.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::ParameterDomain("profile values must be positive".into()));
        }
        let form = DecorrelationForm::Tabulated { times, values };
        let integral_i_f = integrate_tabulated(&form, 1.0);
        let integral_from_zero = integrate_tabulated(&form, 0.0);
        Ok(Self {
            form,
            integral_i_f,
            integral_from_zero,
        })
    }

    /// `f(T)` for `T >= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.form {
            DecorrelationForm::Exponential { c, rate } => c * (-rate * t).exp(),
            DecorrelationForm::Power { c, exponent } => c * (1.0 + t).powf(-exponent),
            DecorrelationForm::Tabulated { times, values } => {
                let n = times.len();
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[n - 1] {
                    let rate = tail_rate(times, values);
                    return values[n - 1] * (-rate * (t - times[n - 1])).exp();
                }
                let k = times.partition_point(|&x| x <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                values[k] + w * (values[k + 1] - values[k])
            }
        }
    }
}

fn tail_rate(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len();
    (values[n - 2] / values[n - 1]).ln() / (times[n - 1] - times[n - 2])
}

/// `int_from^inf f` for a tabulated profile: exact on the linear pieces plus
/// the exponential tail.
fn integrate_tabulated(form: &DecorrelationForm, from: f64) -> f64 {
    let DecorrelationForm::Tabulated { times, values } = form else {
        unreachable!()
    };
    let n = times.len();
    let probe = DecorrelationProfile {
        form: form.clone(),
        integral_i_f: 0.0,
        integral_from_zero: 0.0,
    };
    let mut knots = vec![from];
    knots.extend(times.iter().copied().filter(|&t| t > from));
    let mut acc = 0.0;
    for w in knots.windows(2) {
        acc += 0.5 * (w[1] - w[0]) * (probe.eval(w[0]) + probe.eval(w[1]));
    }
    let last = knots[knots.len() - 1].max(times[n - 1]);
    acc + probe.eval(last) / tail_rate(times, values)
}

/// Constants entering the error bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    /// Uniform `L^4` bound `nu` on the process.
    pub nu: f64,
    /// Largest lag `A`.
    pub horizon_a: f64,
    pub dim_r: usize,
    pub profile: DecorrelationProfile,
    /// Lipschitz constant `lambda(A)` of the covariance curve on `[0, A]`.
    pub lipschitz_lambda: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        let horizon_ok = self.horizon_a >= 0.0 && self.horizon_a.is_finite();
        if !(ok(self.nu) && horizon_ok && self.dim_r > 0 && ok(self.lipschitz_lambda))
            || !ok(self.profile.integral_i_f)
        {
            return Err(Error::ParameterDomain(format!("bound inputs must be positive (A >= 0): {self:?}")));
        }
        Ok(())
    }

    /// `gamma = 8 sqrt(r I(f)) + 2.5 nu^2 sqrt(A + 1)`.
    pub fn gamma_app(&self) -> f64 {
        8.0 * (self.dim_r as f64 * self.profile.integral_i_f).sqrt()
            + 2.5 * self.nu * self.nu * (self.horizon_a + 1.0).sqrt()
    }

    /// Mean-estimate constant `C = 7 I(f)`.
    pub fn mean_constant(&self) -> f64 {
        7.0 * self.profile.integral_i_f
    }
}

/// A recommended scheme with its predicted error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRecommendation {
    pub scheme: SubsamplingScheme,
    pub rho: f64,
    pub span_s: f64,
    pub predicted_error: f64,
}

/// `Delta = c_delta N^(-1/3)`.
pub fn scheme_from_n(n_obs: usize, c_delta: f64) -> Result<SubsamplingScheme> {
    if n_obs < 8 {
        return Err(Error::ParameterDomain(format!("n_obs must be at least 8, got {n_obs}")));
    }
    if !(c_delta > 0.0 && c_delta.is_finite()) {
        return Err(Error::ParameterDomain(format!("c_delta must be positive, got {c_delta}")));
    }
    SubsamplingScheme::unbound(n_obs, c_delta / (n_obs as f64).cbrt())
}

/// `N = ceil(c_n rho^-3)`, `Delta = c_delta rho`, without bound evaluation.
pub fn optimized_scheme(rho: f64, c_n: f64, c_delta: f64) -> Result<SubsamplingScheme> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::ParameterDomain(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(c_n > 0.0 && c_delta > 0.0 && c_n.is_finite() && c_delta.is_finite()) {
        return Err(Error::ParameterDomain("c_n and c_delta must be positive".into()));
    }
    let raw = c_n / (rho * rho * rho);
    // Absorb rounding noise so exact powers such as 0.1^-3 land on 1000.
    let n_obs = if (raw - raw.round()).abs() <= 1e-9 * raw {
        raw.round()
    } else {
        raw.ceil()
    };
    if n_obs > usize::MAX as f64 / 2.0 {
        return Err(Error::ParameterDomain(format!("rho = {rho} needs an unrepresentable N")));
    }
    SubsamplingScheme::unbound(n_obs as usize, c_delta * rho)
}

/// [`optimized_scheme`] with its predicted observable error.
pub fn scheme_from_rho(
    rho: f64,
    c_n: f64,
    c_delta: f64,
    inputs: &BoundInputs,
) -> Result<SchemeRecommendation> {
    let scheme = optimized_scheme(rho, c_n, c_delta)?;
    // Delta = c_delta rho = c_delta c_n^(1/3) N^(-1/3) on this family.
    let predicted_error = error_bound_observable(inputs, &scheme, rho, c_delta * c_n.cbrt())?;
    Ok(SchemeRecommendation {
        span_s: scheme.span(),
        scheme,
        rho,
        predicted_error,
    })
}

/// Why a scheme sequence was rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SchemeSequenceValidation {
    Valid,
    TooShort(usize),
    EpsNotDecreasing { index: usize },
    DeltaIncreasing { index: usize },
    SpanNotIncreasing { index: usize },
}

impl SchemeSequenceValidation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Self::Valid)
    }
}

/// Finite proxy of `Delta -> 0`, `N Delta -> inf` along decreasing `eps`.
pub fn validate_scheme_sequence(schemes: &[(f64, SubsamplingScheme)]) -> SchemeSequenceValidation {
    if schemes.len() < 3 {
        return SchemeSequenceValidation::TooShort(schemes.len());
    }
    for (i, w) in schemes.windows(2).enumerate() {
        let ((e0, s0), (e1, s1)) = (&w[0], &w[1]);
        if !(e1 < e0) {
            return SchemeSequenceValidation::EpsNotDecreasing { index: i + 1 };
        }
        if s1.big_delta > s0.big_delta {
            return SchemeSequenceValidation::DeltaIncreasing { index: i + 1 };
        }
        if !(s1.span() > s0.span()) {
            return SchemeSequenceValidation::SpanNotIncreasing { index: i + 1 };
        }
    }
    SchemeSequenceValidation::Valid
}

/// `g(q, D) = sum_{j=1..q-1} j f(jD)` and the bound `(q-1) I(f) / D`.
pub fn decorrelation_sum_bound(q: usize, d: f64, profile: &DecorrelationProfile) -> Result<(f64, f64)> {
    if q < 2 || !(d > 0.0 && d.is_finite()) {
        return Err(Error::ParameterDomain(format!("need q >= 2 and D > 0 (got {q}, {d})")));
    }
    let g: f64 = (1..q).map(|j| j as f64 * profile.eval(j as f64 * d)).sum();
    Ok((g, (q - 1) as f64 * profile.integral_i_f / d))
}

/// `gamma / sqrt(N Delta) + lambda Delta`.
pub fn error_bound_unobservable(inputs: &BoundInputs, scheme: &SubsamplingScheme) -> f64 {
    inputs.gamma_app() / scheme.span().sqrt() + inputs.lipschitz_lambda * scheme.big_delta
}

/// `L^4` bound on the empirical mean, `(C r)^(1/4) / (N Delta)^(1/4)`.
pub fn mean_error_bound(inputs: &BoundInputs, scheme: &SubsamplingScheme) -> f64 {
    (inputs.mean_constant() * inputs.dim_r as f64).powf(0.25) / scheme.span().powf(0.25)
}

/// `4 nu rho + c_app N^(-1/3)` for a scheme on the `Delta = c_delta N^(-1/3)` family,
/// where `c_app = gamma / sqrt(c_delta) + lambda c_delta`.
pub fn error_bound_observable(
    inputs: &BoundInputs,
    scheme: &SubsamplingScheme,
    rho: f64,
    c_delta: f64,
) -> Result<f64> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::ParameterDomain(format!("rho must be >= 0, got {rho}")));
    }
    let n = scheme.n_obs as f64;
    let family = c_delta / n.cbrt();
    if !((scheme.big_delta - family).abs() <= 0.25 * family) {
        return Err(Error::ParameterDomain(format!(
            "Delta = {} is not on the c_delta N^(-1/3) family (expected about {family})",
            scheme.big_delta
        )));
    }
    let c_app = inputs.gamma_app() / c_delta.sqrt() + inputs.lipschitz_lambda * c_delta;
    Ok(4.0 * inputs.nu * rho + c_app / n.cbrt())
}

/// `E[Z1 Z2 Z3 Z4] = s12 s34 + s13 s24 + s23 s14` for centered jointly Gaussian `Z`.
pub fn gaussian_fourth_moment(cov: &[[f64; 4]; 4]) -> Result<f64> {
    let scale = cov.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..4 {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-12 * scale {
                return Err(Error::ParameterDomain(format!(
                    "covariance not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(cov[0][1] * cov[2][3] + cov[0][2] * cov[1][3] + cov[1][2] * cov[0][3])
}

/// Exponential profile for a stationary OU process.
///
/// For `G`, `H` among `X_s` and `X_s X_t` with the two index sets a gap `T`
/// apart, pairing gives covariances bounded by `v e^(-gamma T)` (singles),
/// `2 |mu| v e^(-gamma T)` (single against product) and
/// `(2 v^2 + 4 mu^2 v) e^(-gamma T)` (products), where `v` is the stationary
/// variance; `c` is the largest of the three.
pub fn ou_decorrelation_profile(params: &OUParams) -> Result<DecorrelationProfile> {
    let v = params.stationary_variance();
    let mu = params.mean;
    // Centered product term: E[X^4] - v^2 = 2 v^2 when the four indices meet.
    let all_equal = [[v; 4]; 4];
    let centered = gaussian_fourth_moment(&all_equal)? - v * v;
    let c = v.max(2.0 * mu.abs() * v).max(centered + 4.0 * mu * mu * v);
    DecorrelationProfile::exponential(c, params.reversion)
}

/// Bound inputs for an OU process with lags up to `horizon_a`.
pub fn ou_bound_inputs(params: &OUParams, horizon_a: f64) -> Result<BoundInputs> {
    let inputs = BoundInputs {
        nu: params.l4_norm(),
        horizon_a,
        dim_r: 1,
        profile: ou_decorrelation_profile(params)?,
        lipschitz_lambda: params.covariance_lipschitz(),
    };
    inputs.validate()?;
    Ok(inputs)
}

/// Machine-readable bound report.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub scheme: SubsamplingScheme,
    pub rho: Option<f64>,
    pub gamma_app: f64,
    pub mean_constant: f64,
    pub integral_i_f: f64,
    pub integral_from_zero: f64,
    pub unobservable_bound: f64,
    pub mean_l4_bound: f64,
    pub observable_bound: Option<f64>,
}

pub fn bound_report(
    inputs: &BoundInputs,
    scheme: &SubsamplingScheme,
    rho: Option<f64>,
    c_delta: f64,
) -> Result<BoundReport> {
    inputs.validate()?;
    let observable_bound = match rho {
        Some(r) => Some(error_bound_observable(inputs, scheme, r, c_delta)?),
        None => None,
    };
    Ok(BoundReport {
        inputs: inputs.clone(),
        scheme: *scheme,
        rho,
        gamma_app: inputs.gamma_app(),
        mean_constant: inputs.mean_constant(),
        integral_i_f: inputs.profile.integral_i_f,
        integral_from_zero: inputs.profile.integral_from_zero,
        unobservable_bound: error_bound_unobservable(inputs, scheme),
        mean_l4_bound: mean_error_bound(inputs, scheme),
        observable_bound,
    })
}
