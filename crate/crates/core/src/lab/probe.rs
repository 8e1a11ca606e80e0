//! Empirical decorrelation profile `f(T)`.
//!
//! Design: `G` ranges over single values `X_s(i)` and products
//! `X_s(i) X_{s+a}(j)` for in-interval offsets `a`; `H` over the same family
//! started `T` after `G`'s interval ends. For each gap the table holds the
//! largest `|E(GH) - E(G)E(H)|` over all `(G, H)` pairs, each covariance being
//! averaged over consecutive blocks of the path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::rng::RandomStreamSpec;
use crate::trajectory::TrajectoryGrid;

/// Offsets (time units) used for the product terms.
pub const DEFAULT_OFFSETS: [f64; 2] = [0.0, 0.5];

const BLOCKS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub gaps: Vec<f64>,
    pub values: Vec<f64>,
    /// Block standard error of the maximizing pair at each gap.
    pub std_errors: Vec<f64>,
    /// `-slope` of `ln f(T)` against `T`, when every value is positive.
    pub fitted_rate: Option<f64>,
    /// Human-readable description of the `(G, H)` family.
    pub design: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Single { i: usize },
    Product { i: usize, j: usize, offset: usize },
}

impl Term {
    fn width(self) -> usize {
        match self {
            Term::Single { .. } => 0,
            Term::Product { offset, .. } => offset,
        }
    }

    fn eval(self, path: &TrajectoryGrid, s: usize) -> f64 {
        match self {
            Term::Single { i } => path.sample(s)[i],
            Term::Product { i, j, offset } => path.sample(s)[i] * path.sample(s + offset)[j],
        }
    }

    fn describe(self, delta: f64) -> String {
        match self {
            Term::Single { i } => format!("X_s({i})"),
            Term::Product { i, j, offset } => format!("X_s({i}) X_(s+{})({j})", offset as f64 * delta),
        }
    }
}

fn design(dim: usize, offsets: &[usize]) -> Vec<Term> {
    let mut terms: Vec<Term> = (0..dim).map(|i| Term::Single { i }).collect();
    for &offset in offsets {
        for i in 0..dim {
            for j in 0..dim {
                // At zero offset X(i)X(j) = X(j)X(i).
                if offset == 0 && j < i {
                    continue;
                }
                terms.push(Term::Product { i, j, offset });
            }
        }
    }
    terms
}

/// Block-averaged `Cov(G_s, H_{s + gap})` over all admissible `s`.
fn block_covariance(path: &TrajectoryGrid, g: Term, h: Term, shift: usize) -> (f64, f64) {
    let count = path.len() - shift - h.width();
    let block = count / BLOCKS;
    let mut covs = Vec::with_capacity(BLOCKS);
    for b in 0..BLOCKS {
        let (mut sg, mut sh, mut sgh) = (0.0, 0.0, 0.0);
        for s in b * block..(b + 1) * block {
            let gv = g.eval(path, s);
            let hv = h.eval(path, s + shift);
            sg += gv;
            sh += hv;
            sgh += gv * hv;
        }
        let n = block as f64;
        covs.push(sgh / n - (sg / n) * (sh / n));
    }
    let mean = covs.iter().sum::<f64>() / BLOCKS as f64;
    let var = covs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (BLOCKS - 1) as f64;
    (mean, (var / BLOCKS as f64).sqrt())
}

/// Probe table on an existing stationary path.
pub fn decorrelation_probe_path(path: &TrajectoryGrid, gaps: &[f64], offsets: &[f64]) -> Result<ProbeTable> {
    if gaps.is_empty() || gaps.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::ParameterDomain("gaps must be positive".into()));
    }
    if gaps.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::ParameterDomain("gaps must be increasing".into()));
    }
    if offsets.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(Error::ParameterDomain("offsets must be >= 0".into()));
    }
    let delta = path.delta();
    let steps = |t: f64| (t / delta).round() as usize;
    let offset_steps: Vec<usize> = offsets.iter().map(|&a| steps(a)).collect();
    let terms = design(path.dim(), &offset_steps);
    let widest = offset_steps.iter().copied().max().unwrap_or(0);
    let longest = widest + steps(gaps[gaps.len() - 1]) + widest;
    let required = longest + 100 * BLOCKS;
    if path.len() < required {
        return Err(Error::InsufficientData {
            required,
            available: path.len(),
        });
    }

    let mut values = Vec::with_capacity(gaps.len());
    let mut std_errors = Vec::with_capacity(gaps.len());
    for &t in gaps {
        let (mut best, mut best_se) = (0.0f64, 0.0);
        for &g in &terms {
            for &h in &terms {
                let (c, se) = block_covariance(path, g, h, g.width() + steps(t));
                if c.abs() > best {
                    best = c.abs();
                    best_se = se;
                }
            }
        }
        values.push(best);
        std_errors.push(best_se);
    }

    let fitted_rate = if gaps.len() >= 2 && values.iter().all(|v| *v > 0.0) {
        let n = gaps.len() as f64;
        let mx = gaps.iter().sum::<f64>() / n;
        let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let my = ly.iter().sum::<f64>() / n;
        let sxy: f64 = gaps.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = gaps.iter().map(|x| (x - mx).powi(2)).sum();
        Some(-sxy / sxx)
    } else {
        None
    };
    let mut described = Vec::with_capacity(terms.len() + 1);
    described.push(format!(
        "G, H over {} terms each; H starts T after G ends; {BLOCKS} blocks",
        terms.len()
    ));
    described.extend(terms.iter().map(|t| t.describe(delta)));
    Ok(ProbeTable {
        gaps: gaps.to_vec(),
        values,
        std_errors,
        fitted_rate,
        design: described,
    })
}

/// Simulates a stationary path of `length` steps and probes it.
pub fn decorrelation_probe(
    model: &ModelSpec,
    gaps: &[f64],
    delta: f64,
    length: usize,
    stream: &RandomStreamSpec,
) -> Result<ProbeTable> {
    let paths = model.simulate(length, delta, stream, None)?;
    decorrelation_probe_path(&paths.hidden, gaps, &DEFAULT_OFFSETS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRole;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn iid_sequence_has_no_correlation() {
        let mut rng = RandomStreamSpec::new(5, 0, StreamRole::ProcessNoise).rng();
        let data: Vec<f64> = (0..200_000).map(|_| rng.sample(StandardNormal)).collect();
        let path = TrajectoryGrid::scalar(0.1, data).unwrap();
        let t = decorrelation_probe_path(&path, &[0.5, 1.0, 2.0], &DEFAULT_OFFSETS).unwrap();
        // Each sample covariance has sd at most sqrt(Var G Var H / n) <= sqrt(4 / n)
        // (products of standard normals at zero offset have variance 2).
        let sd = (4.0f64 / 200_000.0).sqrt();
        for (v, se) in t.values.iter().zip(&t.std_errors) {
            assert!(*v < 5.0 * sd, "{v} (se {se})");
        }
    }

    #[test]
    fn rejects_bad_gaps_and_short_paths() {
        let path = TrajectoryGrid::scalar(0.1, vec![0.0; 5000]).unwrap();
        assert!(decorrelation_probe_path(&path, &[1.0, 0.5], &DEFAULT_OFFSETS).is_err());
        assert!(decorrelation_probe_path(&path, &[0.0], &DEFAULT_OFFSETS).is_err());
        let err = decorrelation_probe_path(&path, &[400.0], &DEFAULT_OFFSETS).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
    }
}
