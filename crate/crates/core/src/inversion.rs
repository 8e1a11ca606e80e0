//! Parameter estimation `theta = G(Psi)` from lagged moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{empirical_mean, lag_index, lagged_covariance};
use crate::trajectory::{SampleView, SubsamplingScheme};

/// One lagged moment; coordinates are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "moment", rename_all = "snake_case")]
pub enum MomentDescriptor {
    Mean { coord: usize },
    Covariance { i: usize, j: usize, lag: f64 },
}

impl MomentDescriptor {
    fn key(&self) -> (u8, usize, usize, u64) {
        match *self {
            Self::Mean { coord } => (0, coord, 0, 0),
            Self::Covariance { i, j, lag } => (1, i, j, lag.to_bits()),
        }
    }

    /// Mean, variance and one positive-lag covariance of coordinate 0.
    pub fn default_set(u1: f64) -> Vec<Self> {
        vec![
            Self::Mean { coord: 0 },
            Self::Covariance { i: 0, j: 0, lag: 0.0 },
            Self::Covariance { i: 0, j: 0, lag: u1 },
        ]
    }
}

/// `Psi = [Psi_1, ..., Psi_p]` with a descriptor per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub entries: Vec<f64>,
    pub descriptors: Vec<MomentDescriptor>,
}

impl MomentVector {
    pub fn new(entries: Vec<f64>, descriptors: Vec<MomentDescriptor>) -> Result<Self> {
        validate_descriptors(&descriptors, None)?;
        if entries.len() != descriptors.len() {
            return Err(Error::ParameterDomain(format!(
                "{} entries for {} descriptors",
                entries.len(),
                descriptors.len()
            )));
        }
        Ok(Self {
            entries,
            descriptors,
        })
    }

    /// Entries under the default descriptor set for lag `u1`.
    pub fn standard(entries: [f64; 3], u1: f64) -> Result<Self> {
        Self::new(entries.to_vec(), MomentDescriptor::default_set(u1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn validate_descriptors(descriptors: &[MomentDescriptor], dim: Option<usize>) -> Result<()> {
    if descriptors.is_empty() {
        return Err(Error::ParameterDomain("at least one moment is required".into()));
    }
    for (k, d) in descriptors.iter().enumerate() {
        if let MomentDescriptor::Covariance { lag, .. } = d {
            if !(*lag >= 0.0 && lag.is_finite()) {
                return Err(Error::ParameterDomain(format!("moment lag must be >= 0, got {lag}")));
            }
        }
        if let Some(r) = dim {
            let fits = match *d {
                MomentDescriptor::Mean { coord } => coord < r,
                MomentDescriptor::Covariance { i, j, .. } => i < r && j < r,
            };
            if !fits {
                return Err(Error::ParameterDomain(format!("descriptor {d:?} exceeds dimension {r}")));
            }
        }
        if descriptors[..k].iter().any(|e| e.key() == d.key()) {
            return Err(Error::ParameterDomain(format!("duplicate moment descriptor {d:?}")));
        }
    }
    Ok(())
}

/// Closed Euclidean ball `Lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl ParameterBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::ParameterDomain(format!("invalid ball radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    fn distance(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.center.len() && self.distance(theta) <= self.radius
    }

    /// Nearest point of the ball.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.distance(theta);
        if d <= self.radius {
            return theta.to_vec();
        }
        let s = self.radius / d;
        theta
            .iter()
            .zip(&self.center)
            .map(|(t, c)| c + s * (t - c))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The iterate was clipped to the ball at least once.
    pub constrained: bool,
}

impl SolverDiagnostics {
    fn closed_form() -> Self {
        Self {
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
            constrained: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub parameter_names: Vec<String>,
    pub theta: Vec<f64>,
    pub truncated: bool,
    pub moment_input: MomentVector,
    pub diagnostics: SolverDiagnostics,
}

impl ParameterEstimate {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameter_names
            .iter()
            .position(|n| n == name)
            .map(|k| self.theta[k])
    }
}

/// Evaluates each descriptor on the sub-sampled sequence (which must hold
/// `N + max kappa` samples).
pub fn extract_moment_vector(
    samples: &SampleView,
    scheme: &SubsamplingScheme,
    descriptors: &[MomentDescriptor],
) -> Result<MomentVector> {
    validate_descriptors(descriptors, Some(samples.dim()))?;
    let (n, d) = (scheme.n_obs, scheme.big_delta);
    let mut entries = Vec::with_capacity(descriptors.len());
    for desc in descriptors {
        let v = match *desc {
            MomentDescriptor::Mean { coord } => empirical_mean(samples, n, 0, d)?.vector[coord],
            MomentDescriptor::Covariance { i, j, lag } => {
                lagged_covariance(samples, n, lag_index(lag, d), d, lag)?.entry(i, j)
            }
        };
        entries.push(v);
    }
    MomentVector::new(entries, descriptors.to_vec())
}

fn check_u1(u1: f64) -> Result<()> {
    if u1 > 0.0 && u1.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("u1 must be positive, got {u1}")))
    }
}

fn three(psi: &MomentVector) -> Result<[f64; 3]> {
    match psi.entries[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(Error::ParameterDomain(format!(
            "expected 3 moments, got {}",
            psi.entries.len()
        ))),
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// OU from `[mean, K(0), K(u1)]`: `gamma = ln(K0 / K1) / u1`, `sigma^2 = 2 gamma K0`.
/// `theta = [mu, gamma, sigma]`.
pub fn invert_ou(psi: &MomentVector, u1: f64) -> Result<ParameterEstimate> {
    check_u1(u1)?;
    let [mean, k0, k1] = three(psi)?;
    if !(k0 > 0.0 && k1 > 0.0 && k1 < k0) {
        return Err(Error::MomentsOutsideModelRange(format!(
            "OU needs 0 < K(u1) < K(0), got K(0) = {k0}, K(u1) = {k1}"
        )));
    }
    let gamma = (k0 / k1).ln() / u1;
    let sigma = (2.0 * gamma * k0).sqrt();
    Ok(ParameterEstimate {
        parameter_names: names(&["mean", "reversion", "noise"]),
        theta: vec![mean, gamma, sigma],
        truncated: false,
        moment_input: psi.clone(),
        diagnostics: SolverDiagnostics::closed_form(),
    })
}

/// CIR from `[E V, Var V, K_V(u1)]`: `theta_H = E V`, `kappa = ln(Var / K1) / u1`,
/// `sigma^2 = 2 kappa Var / theta_H`. `theta = [kappa, theta_H, sigma]`.
pub fn invert_cir(psi: &MomentVector, u1: f64) -> Result<ParameterEstimate> {
    check_u1(u1)?;
    let [mean, var, k1] = three(psi)?;
    if !(mean > 0.0 && var > 0.0 && k1 > 0.0 && k1 < var) {
        return Err(Error::MomentsOutsideModelRange(format!(
            "CIR needs positive moments with K(u1) < Var, got [{mean}, {var}, {k1}]"
        )));
    }
    let kappa = (var / k1).ln() / u1;
    let sigma = (2.0 * kappa * var / mean).sqrt();
    Ok(ParameterEstimate {
        parameter_names: names(&["vol_reversion", "vol_mean", "vol_of_vol"]),
        theta: vec![kappa, mean, sigma],
        truncated: false,
        moment_input: psi.clone(),
        diagnostics: SolverDiagnostics::closed_form(),
    })
}

/// A forward moment map `theta -> Psi(theta)`.
pub trait MomentMap: Sync {
    fn name(&self) -> &str;
    fn parameter_names(&self) -> Vec<String>;
    fn descriptors(&self) -> Vec<MomentDescriptor>;
    /// Fails outside the model's parameter domain.
    fn forward(&self, theta: &[f64]) -> Result<Vec<f64>>;
}

/// OU `(mu, gamma, sigma) -> [mu, v, v e^(-gamma u1)]` with `v = sigma^2 / 2 gamma`.
#[derive(Debug, Clone, Copy)]
pub struct OuMomentMap {
    pub u1: f64,
}

impl MomentMap for OuMomentMap {
    fn name(&self) -> &str {
        "ou"
    }

    fn parameter_names(&self) -> Vec<String> {
        names(&["mean", "reversion", "noise"])
    }

    fn descriptors(&self) -> Vec<MomentDescriptor> {
        MomentDescriptor::default_set(self.u1)
    }

    fn forward(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let [mu, gamma, sigma] = theta else {
            return Err(Error::ParameterDomain("OU has three parameters".into()));
        };
        if !(*gamma > 0.0) {
            return Err(Error::ParameterDomain("OU reversion must be positive".into()));
        }
        let v = sigma * sigma / (2.0 * gamma);
        Ok(vec![*mu, v, v * (-gamma * self.u1).exp()])
    }
}

/// CIR `(kappa, theta, sigma) -> [theta, s, s e^(-kappa u1)]` with `s = sigma^2 theta / 2 kappa`.
#[derive(Debug, Clone, Copy)]
pub struct CirMomentMap {
    pub u1: f64,
}

impl MomentMap for CirMomentMap {
    fn name(&self) -> &str {
        "cir"
    }

    fn parameter_names(&self) -> Vec<String> {
        names(&["vol_reversion", "vol_mean", "vol_of_vol"])
    }

    fn descriptors(&self) -> Vec<MomentDescriptor> {
        MomentDescriptor::default_set(self.u1)
    }

    fn forward(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let [kappa, mean, sigma] = theta else {
            return Err(Error::ParameterDomain("CIR has three parameters".into()));
        };
        if !(*kappa > 0.0 && *mean > 0.0) {
            return Err(Error::ParameterDomain("CIR rate and level must be positive".into()));
        }
        let s = sigma * sigma * mean / (2.0 * kappa);
        Ok(vec![*mean, s, s * (-kappa * self.u1).exp()])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LeastSquaresOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
        }
    }
}

fn residual(map: &dyn MomentMap, theta: &[f64], target: &[f64]) -> Option<(Vec<f64>, f64)> {
    let psi = map.forward(theta).ok()?;
    if psi.len() != target.len() || psi.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let r: Vec<f64> = psi.iter().zip(target).map(|(a, b)| a - b).collect();
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Some((r, norm))
}

/// Solves the square system `a x = b` by partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(piv, col);
        b.swap(piv, col);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Minimizes `|Psi(theta) - psi_hat|_2` over the ball by damped Gauss-Newton
/// with central finite-difference Jacobians (step `1e-6 (1 + |theta_i|)`).
///
/// Returns `SolverDidNotConverge` carrying the last iterate when the iteration
/// budget runs out.
pub fn invert_least_squares(
    map: &dyn MomentMap,
    psi_hat: &MomentVector,
    init: &[f64],
    bounds: &ParameterBall,
    options: LeastSquaresOptions,
) -> Result<ParameterEstimate> {
    let p = init.len();
    if bounds.center.len() != p {
        return Err(Error::ParameterDomain("ball and init dimensions differ".into()));
    }
    if !bounds.contains(init) {
        return Err(Error::ParameterDomain("initial point lies outside the ball".into()));
    }
    let target = &psi_hat.entries;
    let Some((mut r, mut norm)) = residual(map, init, target) else {
        return Err(Error::ParameterDomain("forward map fails at the initial point".into()));
    };
    let m = r.len();
    let mut theta = init.to_vec();
    let mut damping = 1e-3;
    let mut constrained = false;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        if norm == 0.0 {
            converged = true;
            break;
        }
        // Jacobian by central differences, one-sided at the domain edge.
        let base = map.forward(&theta)?;
        let mut jac = vec![vec![0.0; p]; m];
        for k in 0..p {
            let h = 1e-6 * (1.0 + theta[k].abs());
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[k] += h;
            minus[k] -= h;
            let (fp, fm, width) = match (map.forward(&plus), map.forward(&minus)) {
                (Ok(a), Ok(b)) => (a, b, 2.0 * h),
                (Ok(a), Err(_)) => (a, base.clone(), h),
                (Err(_), Ok(b)) => (base.clone(), b, h),
                (Err(e), Err(_)) => return Err(e),
            };
            for i in 0..m {
                jac[i][k] = (fp[i] - fm[i]) / width;
            }
        }
        let mut jtj = vec![vec![0.0; p]; p];
        let mut jtr = vec![0.0; p];
        for a in 0..p {
            for b in 0..p {
                jtj[a][b] = (0..m).map(|i| jac[i][a] * jac[i][b]).sum();
            }
            jtr[a] = -(0..m).map(|i| jac[i][a] * r[i]).sum::<f64>();
        }
        let mut accepted = false;
        let mut step_norm = 0.0;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for (k, row) in a.iter_mut().enumerate() {
                row[k] += damping * (jtj[k][k] + 1e-12);
            }
            let Some(step) = solve(a, jtr.clone()) else {
                damping *= 10.0;
                continue;
            };
            let raw: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + s).collect();
            let cand = bounds.project(&raw);
            let clipped = cand != raw;
            step_norm = cand
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if let Some((rc, nc)) = residual(map, &cand, target) {
                if nc <= norm {
                    constrained |= clipped;
                    let stalled = norm - nc <= 1e-15 * norm.max(1e-300);
                    theta = cand;
                    r = rc;
                    norm = nc;
                    damping = (damping / 10.0).max(1e-12);
                    accepted = true;
                    if stalled && step_norm > 0.0 && !clipped {
                        step_norm = 0.0;
                    }
                    break;
                }
            }
            damping *= 10.0;
        }
        let scale = 1.0 + theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !accepted || step_norm <= options.step_tolerance * scale {
            // No downhill step exists at any damping: a stationary point.
            converged = true;
            break;
        }
    }
    let estimate = ParameterEstimate {
        parameter_names: map.parameter_names(),
        theta,
        truncated: false,
        moment_input: psi_hat.clone(),
        diagnostics: SolverDiagnostics {
            residual_norm: norm,
            iterations,
            converged,
            constrained,
        },
    };
    if converged {
        Ok(estimate)
    } else {
        Err(Error::SolverDidNotConverge {
            estimate: Box::new(estimate),
        })
    }
}

/// `1_Lambda(theta) theta`: unchanged inside the closed ball, zero outside.
pub fn truncate_to_ball(estimate: ParameterEstimate, ball: &ParameterBall) -> ParameterEstimate {
    if ball.contains(&estimate.theta) {
        return estimate;
    }
    let p = estimate.theta.len();
    ParameterEstimate {
        theta: vec![0.0; p],
        truncated: true,
        ..estimate
    }
}
