use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStreamSpec;
use crate::trajectory::TrajectoryGrid;

/// Separable polynomial potential `Q(x) = sum_i sum_k coefficients[i][k] x_i^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialPotential {
    pub name: String,
    /// One coefficient list per coordinate, lowest degree first.
    pub coefficients: Vec<Vec<f64>>,
}

impl PolynomialPotential {
    /// `x^2 / 2` in one dimension.
    pub fn quadratic() -> Self {
        Self {
            name: "quadratic".into(),
            coefficients: vec![vec![0.0, 0.0, 0.5]],
        }
    }

    /// `x^4 / 4` in one dimension.
    pub fn quartic() -> Self {
        Self {
            name: "quartic".into(),
            coefficients: vec![vec![0.0, 0.0, 0.0, 0.0, 0.25]],
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// `dQ/dx_i` at scalar coordinate value `x`.
    pub fn partial(&self, i: usize, x: f64) -> f64 {
        let c = &self.coefficients[i];
        let mut acc = 0.0;
        for k in (1..c.len()).rev() {
            acc = acc * x + k as f64 * c[k];
        }
        acc
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(x)
            .map(|(c, &xi)| c.iter().rev().fold(0.0, |acc, &ck| acc * xi + ck))
            .sum()
    }

    fn check_confining(&self) -> Result<()> {
        for (i, c) in self.coefficients.iter().enumerate() {
            let lead = c.iter().rposition(|&v| v != 0.0);
            match lead {
                Some(deg) if deg >= 2 && deg % 2 == 0 && c[deg] > 0.0 => {}
                _ => {
                    return Err(Error::ParameterDomain(format!(
                        "potential '{}' is not confining in coordinate {i}",
                        self.name
                    )))
                }
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::ParameterDomain("non-finite potential coefficient".into()));
            }
        }
        Ok(())
    }
}

/// `dX = -grad Q(X) dt + sigma dW` with constant `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientDiffusionParams {
    pub potential: PolynomialPotential,
    /// Row-major `r x r` matrix.
    pub diffusion_matrix: Vec<Vec<f64>>,
}

impl GradientDiffusionParams {
    pub fn new(potential: PolynomialPotential, diffusion_matrix: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self {
            potential,
            diffusion_matrix,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.dim();
        if r == 0 {
            return Err(Error::ParameterDomain("potential has no coordinates".into()));
        }
        self.potential.check_confining()?;
        if self.diffusion_matrix.len() != r || self.diffusion_matrix.iter().any(|row| row.len() != r)
        {
            return Err(Error::ParameterDomain(format!(
                "diffusion matrix must be {r}x{r}"
            )));
        }
        if determinant(&self.diffusion_matrix).abs() < 1e-12 {
            return Err(Error::ParameterDomain("diffusion matrix is singular".into()));
        }
        Ok(())
    }

    /// Diagonal of `sigma sigma^T`.
    fn noise_diag(&self) -> Vec<f64> {
        self.diffusion_matrix
            .iter()
            .map(|row| row.iter().map(|v| v * v).sum())
            .collect()
    }

    /// Per-coordinate state scale: the radius where the restoring work
    /// `x Q_i'(x)` reaches ten times the noise intensity.
    pub fn state_scales(&self) -> Vec<f64> {
        self.noise_diag()
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let target = 10.0 * a;
                let work = |x: f64| {
                    (x * self.potential.partial(i, x)).min(-x * self.potential.partial(i, -x))
                };
                let mut x = 1e-3;
                for _ in 0..200 {
                    if work(x) >= target {
                        break;
                    }
                    x *= 1.25;
                }
                x
            })
            .collect()
    }

    /// Euler step guard: one drift step at the state scale moves less than half of it.
    pub fn check_step(&self, delta: f64) -> Result<()> {
        for (i, s) in self.state_scales().into_iter().enumerate() {
            let drift = self
                .potential
                .partial(i, s)
                .abs()
                .max(self.potential.partial(i, -s).abs());
            if delta * drift >= 0.5 * s {
                return Err(Error::ParameterDomain(format!(
                    "step {delta} too coarse for potential '{}' (coordinate {i}, scale {s:.3})",
                    self.potential.name
                )));
            }
        }
        Ok(())
    }

    /// Burn-in of ten relaxation times, the slowest rate being read off the
    /// potential at the state scale.
    pub fn default_burn_in(&self, delta: f64) -> usize {
        let slowest = self
            .state_scales()
            .into_iter()
            .enumerate()
            .map(|(i, s)| self.potential.partial(i, s) / s)
            .fold(f64::INFINITY, f64::min);
        (10.0 / slowest / delta).ceil() as usize
    }
}

fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

/// Euler-Maruyama path of `length` samples after discarding `burn_in` steps from
/// the origin.
pub fn simulate_gradient_diffusion(
    params: &GradientDiffusionParams,
    length: usize,
    delta_fine: f64,
    stream: &RandomStreamSpec,
    burn_in: usize,
) -> Result<TrajectoryGrid> {
    params.validate()?;
    if length == 0 {
        return Err(Error::ParameterDomain("empty trajectory requested".into()));
    }
    if !(delta_fine > 0.0 && delta_fine.is_finite()) {
        return Err(Error::ParameterDomain(format!("delta must be positive, got {delta_fine}")));
    }
    params.check_step(delta_fine)?;
    let r = params.dim();
    let sigma = &params.diffusion_matrix;
    let sq = delta_fine.sqrt();
    let mut rng = stream.rng();
    let mut x = vec![0.0; r];
    let mut z = vec![0.0; r];
    let mut data = Vec::with_capacity(length * r);
    for step in 0..burn_in + length {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let prev = x.clone();
        for i in 0..r {
            let noise: f64 = sigma[i].iter().zip(&z).map(|(s, w)| s * w).sum();
            x[i] = prev[i] - params.potential.partial(i, prev[i]) * delta_fine + sq * noise;
            if !x[i].is_finite() {
                return Err(Error::SimulationDiverged { step });
            }
        }
        if step >= burn_in {
            data.extend_from_slice(&x);
        }
    }
    TrajectoryGrid::from_raw(r, delta_fine, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRole;

    fn sqrt2() -> Vec<Vec<f64>> {
        vec![vec![2f64.sqrt()]]
    }

    #[test]
    fn confinement_checked() {
        let bad = PolynomialPotential {
            name: "cubic".into(),
            coefficients: vec![vec![0.0, 0.0, 0.0, 1.0]],
        };
        assert!(GradientDiffusionParams::new(bad, sqrt2()).is_err());
        let neg = PolynomialPotential {
            name: "neg".into(),
            coefficients: vec![vec![0.0, 0.0, -1.0]],
        };
        assert!(GradientDiffusionParams::new(neg, sqrt2()).is_err());
        assert!(GradientDiffusionParams::new(PolynomialPotential::quadratic(), vec![vec![0.0]]).is_err());
    }

    #[test]
    fn partial_derivative() {
        let q = PolynomialPotential {
            name: "mix".into(),
            coefficients: vec![vec![1.0, 2.0, 3.0, 0.0, 0.5]],
        };
        // Q = 1 + 2x + 3x^2 + x^4/2, Q' = 2 + 6x + 2x^3
        assert!((q.partial(0, 2.0) - (2.0 + 12.0 + 16.0)).abs() < 1e-12);
        assert!((q.value(&[2.0]) - (1.0 + 4.0 + 12.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_length_rejected() {
        let p = GradientDiffusionParams::new(PolynomialPotential::quadratic(), sqrt2()).unwrap();
        let s = RandomStreamSpec::new(0, 0, StreamRole::ProcessNoise);
        assert!(simulate_gradient_diffusion(&p, 0, 0.01, &s, 0).is_err());
    }

    #[test]
    fn coarse_step_rejected() {
        let p = GradientDiffusionParams::new(PolynomialPotential::quartic(), sqrt2()).unwrap();
        assert!(p.check_step(0.5).is_err());
        assert!(p.check_step(0.01).is_ok());
    }

    #[test]
    fn quadratic_potential_reduces_to_ou() {
        let p = GradientDiffusionParams::new(PolynomialPotential::quadratic(), sqrt2()).unwrap();
        let delta = 0.01;
        let s = RandomStreamSpec::new(3, 0, StreamRole::ProcessNoise);
        let g = simulate_gradient_diffusion(&p, 2_000_000, delta, &s, p.default_burn_in(delta))
            .unwrap();
        let x = g.as_slice();
        let n = x.len() as f64;
        let var = x.iter().map(|v| v * v).sum::<f64>() / n;
        // Euler stationary variance is 1 / (1 - delta / 2); statistical se ~ sqrt(2 / T).
        let se = (2.0 / (n * delta)).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se + delta, "var {var}");
    }

    /// Quadrature oracle: stationary density proportional to exp(-2 Q / sigma^2).
    #[test]
    fn quartic_second_moment_matches_quadrature() {
        let density = |x: f64| (-(x.powi(4) / 4.0)).exp();
        let (a, b, n) = (-8.0, 8.0, 20_000);
        let h = (b - a) / n as f64;
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let mut s = f(a) + f(b);
            for k in 1..n {
                let x = a + k as f64 * h;
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        };
        let oracle = simpson(&|x| x * x * density(x)) / simpson(&density);

        let p = GradientDiffusionParams::new(PolynomialPotential::quartic(), sqrt2()).unwrap();
        let delta = 0.005;
        let s = RandomStreamSpec::new(4, 0, StreamRole::ProcessNoise);
        let g = simulate_gradient_diffusion(&p, 4_000_000, delta, &s, p.default_burn_in(delta))
            .unwrap();
        let x = g.as_slice();
        let m2 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((m2 - oracle).abs() < 0.03, "m2 {m2} oracle {oracle}");
    }
}
