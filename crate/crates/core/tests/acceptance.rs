//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every tolerance is pinned below. Monte Carlo experiments run the bundled
//! presets through the library; errors, slopes and fractions are recomputed
//! here from the raw ensembles with oracles written in this file.

use std::process::ExitCode;
use std::time::Instant;

use indobs::estimators::{lag_index, lagged_covariance, lagged_covariance_raw_form, sup_norm};
use indobs::inversion::{invert_ou, MomentVector};
use indobs::lab::{preset, run_replications, Ensemble, ExperimentConfig};
use indobs::models::OUParams;
use indobs::scheduler::{
    decorrelation_sum_bound, error_bound_unobservable, gaussian_fourth_moment, ou_bound_inputs, ou_decorrelation_profile,
    DecorrelationProfile,
};
use indobs::{RandomStreamSpec, SampleView, StreamRole};
use rand::Rng;

// Criterion 1
const RATE_SLOPE_MIN: f64 = -0.43;
const RATE_SLOPE_MAX: f64 = -0.23;
// Criterion 2
const BOUND_FRACTION_MIN: f64 = 0.95;
// Criterion 3
const GAP_SLOPE_TARGET: f64 = 1.0;
const GAP_SLOPE_TOL: f64 = 0.1;
// Criterion 4
const RHO_BAND_MAX_RATIO: f64 = 3.0;
const RHO_SLOPE_TARGET: f64 = 1.0;
const RHO_SLOPE_TOL: f64 = 0.2;
// Criterion 5
const ROUND_TRIP_REL: f64 = 1e-9;
const ESTIMATION_EPS: f64 = 0.05;
const ESTIMATION_REL_TOL: f64 = 0.10;
const ESTIMATION_MIN_SHARE: f64 = 0.90;
// Criterion 6
const HESTON_SMALL_EPS: f64 = 0.005;
const HESTON_LARGE_EPS: f64 = 0.01;
const HESTON_LEVEL_TOL: f64 = 0.10;
const HESTON_RATE_VOL_TOL: f64 = 0.30;
// Criterion 7
const SHIFT_ABS_TOL: f64 = 1e-12;
const SCALE_REL_TOL: f64 = 1e-12;
const FORMS_REL_TOL: f64 = 1e-10;
const SUM_BOUND_REL_SLACK: f64 = 1e-12;
const INVARIANT_TRIALS: usize = 2000;
// Criterion 8
const MEAN_L2_SLOPE_TARGET: f64 = -0.5;
const MEAN_L4_SLOPE_TARGET: f64 = -0.25;
const MEAN_SLOPE_TOL: f64 = 0.1;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Least-squares slope of `ln y` on `ln x`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Stationary OU covariance `sigma^2 / (2 gamma) e^(-gamma u)`.
fn ou_cov(gamma: f64, sigma: f64, u: f64) -> f64 {
    sigma * sigma / (2.0 * gamma) * (-gamma * u).exp()
}

fn ou_of(cfg: &ExperimentConfig) -> (f64, f64, f64) {
    match &cfg.model {
        indobs::models::ModelSpec::Ou(p) => (p.mean, p.reversion, p.noise),
        other => panic!("expected an OU model, got {}", other.name()),
    }
}

/// Monte Carlo `(mean |s|^p)^(1/p)`.
fn lp(samples: impl Iterator<Item = f64>, p: i32) -> f64 {
    let (mut acc, mut n) = (0.0, 0.0);
    for s in samples {
        acc += s.abs().powi(p);
        n += 1.0;
    }
    (acc / n).powf(1.0 / p as f64)
}

/// `L^2` error of the hidden (or observable) covariance at every `(eps, lag)`.
fn cov_errors(ens: &Ensemble, observable: bool) -> Vec<Vec<f64>> {
    let (_, gamma, sigma) = ou_of(&ens.config);
    (0..ens.points.len())
        .map(|e| {
            ens.config
                .lags
                .iter()
                .enumerate()
                .map(|(l, &u)| {
                    let k = ou_cov(gamma, sigma, u);
                    lp(
                        ens.records_at(e).iter().map(|r| (if observable { &r.k_y } else { &r.k_x })[l][0] - k),
                        2,
                    )
                })
                .collect()
        })
        .collect()
}

fn run(name: &str) -> Ensemble {
    let cfg = preset(name).expect("preset parses");
    run_replications(&cfg, None).expect("experiment runs")
}

fn criteria_1_and_2() -> (Outcome, Outcome) {
    let ens = run("ou-rate");
    let errs = cov_errors(&ens, false);
    let lags = &ens.config.lags;
    let mut ok1 = true;
    let mut parts = Vec::new();
    for (l, u) in lags.iter().enumerate() {
        let pts: Vec<(f64, f64)> = ens
            .points
            .iter()
            .enumerate()
            .map(|(e, p)| (p.scheme.n_obs as f64, errs[e][l]))
            .collect();
        let s = loglog_slope(&pts);
        ok1 &= (RATE_SLOPE_MIN..=RATE_SLOPE_MAX).contains(&s);
        parts.push(format!("u={u}: {s:.4}"));
    }
    let c1 = outcome(
        ok1,
        format!("slopes {} in [{RATE_SLOPE_MIN}, {RATE_SLOPE_MAX}]", parts.join(", ")),
    );

    let (_, gamma, sigma) = ou_of(&ens.config);
    let params = OUParams::new(0.0, gamma, sigma).unwrap();
    let horizon = lags.iter().copied().fold(0.0, f64::max);
    let inputs = ou_bound_inputs(&params, horizon).unwrap();
    // Pairing constants for singles, single x product and products.
    let mu = 0.0;
    let v = sigma * sigma / (2.0 * gamma);
    let c_expected = v.max(2.0 * mu * v).max(2.0 * v * v + 4.0 * mu * mu * v);
    let profile_ok = (inputs.profile.integral_i_f - c_expected / gamma * (-gamma).exp()).abs() < 1e-12;
    let mut inside = 0;
    let mut total = 0;
    let mut worst: f64 = 0.0;
    for (e, p) in ens.points.iter().enumerate() {
        let bound = error_bound_unobservable(&inputs, &p.scheme);
        for err in &errs[e] {
            total += 1;
            inside += (*err <= bound) as usize;
            worst = worst.max(err / bound);
        }
    }
    let frac = inside as f64 / total as f64;
    let c2 = outcome(
        profile_ok && frac >= BOUND_FRACTION_MIN,
        format!(
            "{inside}/{total} points under the bound (fraction {frac:.3} >= {BOUND_FRACTION_MIN}), \
             largest error/bound {worst:.3}, gamma_app {:.3}",
            inputs.gamma_app()
        ),
    );
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let ens = run("perturbation-gap");
    let (_, gamma, sigma) = ou_of(&ens.config);
    let v = sigma * sigma / (2.0 * gamma);
    let nu_x = (3.0 * v * v).powf(0.25);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut per_lag: Vec<Vec<(f64, f64)>> = vec![Vec::new(); ens.config.lags.len()];
    for (e, p) in ens.points.iter().enumerate() {
        let nu = (1.0 + p.rho) * nu_x;
        for (l, series) in per_lag.iter_mut().enumerate() {
            let gap = lp(ens.records_at(e).iter().map(|r| r.k_y[l][0] - r.k_x[l][0]), 2);
            let bound = 4.0 * nu * p.rho;
            ok &= gap <= bound;
            worst = worst.max(gap / bound);
            series.push((p.rho, gap));
        }
    }
    let slopes: Vec<f64> = per_lag.iter().map(|s| loglog_slope(s)).collect();
    let slope_ok = slopes.iter().all(|s| (s - GAP_SLOPE_TARGET).abs() <= GAP_SLOPE_TOL);
    outcome(
        ok && slope_ok,
        format!(
            "largest gap/(4 nu rho) {worst:.3}; slopes vs rho {:?} within {GAP_SLOPE_TARGET} +/- {GAP_SLOPE_TOL}",
            slopes.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_4() -> Outcome {
    let ens = run("optimized-sweep");
    let errs = cov_errors(&ens, true);
    let mut ok = true;
    let mut parts = Vec::new();
    for (l, u) in ens.config.lags.iter().enumerate() {
        let ratios: Vec<f64> = ens.points.iter().enumerate().map(|(e, p)| errs[e][l] / p.rho).collect();
        let band = ratios.iter().copied().fold(f64::MIN, f64::max) / ratios.iter().copied().fold(f64::MAX, f64::min);
        let pts: Vec<(f64, f64)> = ens.points.iter().enumerate().map(|(e, p)| (p.rho, errs[e][l])).collect();
        let s = loglog_slope(&pts);
        ok &= band <= RHO_BAND_MAX_RATIO && (s - RHO_SLOPE_TARGET).abs() <= RHO_SLOPE_TOL;
        parts.push(format!("u={u}: band {band:.3}, slope {s:.4}"));
    }
    outcome(
        ok,
        format!(
            "{} (band <= {RHO_BAND_MAX_RATIO}, slope {RHO_SLOPE_TARGET} +/- {RHO_SLOPE_TOL})",
            parts.join("; ")
        ),
    )
}

fn criterion_5() -> Outcome {
    // Round trip on a grid over the valid domain.
    let mut worst: f64 = 0.0;
    for &mu in &[-5.0, 0.0, 0.3, 5.0] {
        for &gamma in &[0.05, 0.5, 1.0, 3.0, 20.0] {
            for &sigma in &[0.1, 1.0, 2.0_f64.sqrt(), 4.0] {
                for &u1 in &[0.25, 1.0, 2.0] {
                    let psi = MomentVector::standard(
                        [mu, ou_cov(gamma, sigma, 0.0), ou_cov(gamma, sigma, u1)],
                        u1,
                    )
                    .unwrap();
                    let est = invert_ou(&psi, u1).unwrap();
                    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
                    worst = worst
                        .max(rel(est.theta[0], mu))
                        .max(rel(est.theta[1], gamma))
                        .max(rel(est.theta[2] * est.theta[2], sigma * sigma));
                }
            }
        }
    }
    let round_trip_ok = worst <= ROUND_TRIP_REL;

    let ens = run("ou-estimation");
    let (mu, gamma, sigma) = ou_of(&ens.config);
    let e = ens
        .points
        .iter()
        .position(|p| (p.eps - ESTIMATION_EPS).abs() < 1e-12)
        .expect("eps = 0.05 in the grid");
    let recs = ens.records_at(e);
    let truth = [mu, gamma, sigma];
    let shares: Vec<f64> = (0..3)
        .map(|k| {
            recs.iter()
                .filter(|r| {
                    r.theta
                        .as_ref()
                        .is_some_and(|t| ((t[k] - truth[k]) / truth[k]).abs() <= ESTIMATION_REL_TOL)
                })
                .count() as f64
                / recs.len() as f64
        })
        .collect();
    let est_ok = shares.iter().all(|s| *s >= ESTIMATION_MIN_SHARE);
    outcome(
        round_trip_ok && est_ok,
        format!(
            "round-trip worst rel {worst:.2e} <= {ROUND_TRIP_REL:e}; at eps {ESTIMATION_EPS}, share within \
             {ESTIMATION_REL_TOL} for (mu, gamma, sigma) = ({:.3}, {:.3}, {:.3}) >= {ESTIMATION_MIN_SHARE} over {} reps",
            shares[0],
            shares[1],
            shares[2],
            recs.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let ens = run("heston");
    let (kappa, theta, sigma) = match &ens.config.model {
        indobs::models::ModelSpec::Heston(p) => (p.vol_reversion, p.vol_mean, p.vol_of_vol),
        _ => unreachable!(),
    };
    let feller = 2.0 * kappa * theta >= sigma * sigma;
    let truth = [kappa, theta, sigma];
    let rmse_at = |eps: f64| -> Vec<f64> {
        let e = ens.points.iter().position(|p| (p.eps - eps).abs() < 1e-12).expect("eps in grid");
        let recs = ens.records_at(e);
        (0..3)
            .map(|k| {
                let errs: Vec<f64> = recs
                    .iter()
                    .map(|r| r.theta.as_ref().map_or(f64::INFINITY, |t| (t[k] - truth[k]) / truth[k]))
                    .collect();
                (errs.iter().map(|x| x * x).sum::<f64>() / errs.len() as f64).sqrt()
            })
            .collect()
    };
    let small = rmse_at(HESTON_SMALL_EPS);
    let large = rmse_at(HESTON_LARGE_EPS);
    let level_ok = small[1] <= HESTON_LEVEL_TOL;
    let others_ok = small[0] <= HESTON_RATE_VOL_TOL && small[2] <= HESTON_RATE_VOL_TOL;
    let monotone = small.iter().zip(&large).all(|(s, l)| s <= l);
    outcome(
        feller && level_ok && others_ok && monotone,
        format!(
            "relative RMSE (kappa, theta, sigma) at eps {HESTON_LARGE_EPS}: ({:.3}, {:.3}, {:.3}), at eps \
             {HESTON_SMALL_EPS}: ({:.3}, {:.3}, {:.3}); limits theta {HESTON_LEVEL_TOL}, kappa/sigma \
             {HESTON_RATE_VOL_TOL}, non-increasing: {monotone}",
            large[0], large[1], large[2], small[0], small[1], small[2]
        ),
    )
}

/// Double loop over `(1/N) sum (X_t(i) - m_i)(X_{t+k}(j) - m'_j)`.
fn naive_cov(data: &[f64], dim: usize, n: usize, k: usize) -> Vec<f64> {
    let at = |t: usize, c: usize| data[t * dim + c];
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut mi = 0.0;
            for t in 0..n {
                mi += at(t, i);
            }
            mi /= n as f64;
            let mut mj = 0.0;
            for t in 0..n {
                mj += at(t + k, j);
            }
            mj /= n as f64;
            let mut s = 0.0;
            for t in 0..n {
                s += (at(t, i) - mi) * (at(t + k, j) - mj);
            }
            out[i * dim + j] = s / n as f64;
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let mut rng = RandomStreamSpec::new(77, 0, StreamRole::ProcessNoise).rng();
    let mut failures: Vec<String> = Vec::new();
    let mut note = |ok: bool, what: &str| {
        if !ok && !failures.iter().any(|f| f == what) {
            failures.push(what.to_string());
        }
    };
    for _ in 0..INVARIANT_TRIALS {
        let dim = rng.random_range(1..=3usize);
        let len = rng.random_range(12..=60usize);
        let k = rng.random_range(0..=len / 11);
        let n = len - k;
        if n < 10 * k {
            continue;
        }
        let data: Vec<f64> = (0..dim * len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let view = |d: &[f64]| lagged_covariance(&SampleView::contiguous(d, dim), n, k, 1.0, k as f64).unwrap();
        let base = view(&data);

        let c: f64 = rng.random_range(-10.0..10.0);
        let shifted: Vec<f64> = data.iter().map(|v| v + c).collect();
        note(
            base.matrix.iter().zip(&view(&shifted).matrix).all(|(a, b)| (a - b).abs() <= SHIFT_ABS_TOL),
            "shift invariance",
        );

        let lambda: f64 = rng.random_range(-5.0..5.0);
        let scaled: Vec<f64> = data.iter().map(|v| v * lambda).collect();
        let scale = sup_norm(&base.matrix) * lambda * lambda;
        note(
            base.matrix
                .iter()
                .zip(&view(&scaled).matrix)
                .all(|(a, b)| (b - lambda * lambda * a).abs() <= SCALE_REL_TOL * scale.max(1e-300)),
            "scaling",
        );

        let raw = lagged_covariance_raw_form(&SampleView::contiguous(&data, dim), n, k).unwrap();
        let s = sup_norm(&base.matrix).max(1e-3);
        note(
            base.matrix.iter().zip(&raw).all(|(a, b)| (a - b).abs() <= FORMS_REL_TOL * s),
            "form equivalence",
        );

        // Brute force on short sequences.
        let blen = rng.random_range(2..=20usize);
        let bk = rng.random_range(0..=1usize);
        let bn = blen - bk;
        if bn >= 10 * bk && bn >= 2 {
            let short: Vec<f64> = (0..dim * blen).map(|_| rng.random_range(-100.0..100.0)).collect();
            let est = lagged_covariance(&SampleView::contiguous(&short, dim), bn, bk, 1.0, 0.0).unwrap();
            note(est.matrix == naive_cov(&short, dim, bn, bk), "brute-force equality");
        }

        let u: f64 = rng.random_range(0.0..50.0);
        let d: f64 = rng.random_range(0.001..5.0);
        let kk = lag_index(u, d);
        note((kk as f64 * d - u).abs() <= d / 2.0 * (1.0 + 1e-12), "|kappa Delta - u| <= Delta/2");
        note(lag_index(0.0, d) == 0, "kappa(0) = 0");
    }

    let ou = OUParams::new(0.0, 1.0, 2.0_f64.sqrt()).unwrap();
    // Each profile with a closed form written here: f(T) = 2 e^-T for the
    // unit OU process, c e^(-rate T), c (1 + T)^-p. The flag marks profiles
    // for which the bound with I(f) = int_1^inf f is required; for faster
    // decay only the int_0^inf version is a theorem (D sum f(jD) <= int_0^inf f
    // for decreasing f), and counterexamples are reported.
    type Closed = Box<dyn Fn(f64) -> f64>;
    let profiles: Vec<(&str, DecorrelationProfile, Closed, bool)> = vec![
        ("ou", ou_decorrelation_profile(&ou).unwrap(), Box::new(|t: f64| 2.0 * (-t).exp()), true),
        ("exp(0.5)", DecorrelationProfile::exponential(1.0, 0.5).unwrap(), Box::new(|t: f64| (-0.5 * t).exp()), true),
        ("exp(1)", DecorrelationProfile::exponential(1.0, 1.0).unwrap(), Box::new(|t: f64| (-t).exp()), true),
        ("power(2)", DecorrelationProfile::power(1.0, 2.0).unwrap(), Box::new(|t: f64| (1.0 + t).powi(-2)), true),
        ("exp(3)", DecorrelationProfile::exponential(1.0, 3.0).unwrap(), Box::new(|t: f64| (-3.0 * t).exp()), false),
        ("power(3)", DecorrelationProfile::power(1.0, 3.0).unwrap(), Box::new(|t: f64| (1.0 + t).powi(-3)), false),
    ];
    let qs: Vec<usize> = (2..=200).collect();
    let d_grid: Vec<f64> = (0..=60).map(|k| 10f64.powf(-2.0 + 3.0 * k as f64 / 60.0)).collect();
    let mut counterexamples: Vec<String> = Vec::new();
    for (name, prof, closed, required) in &profiles {
        let mut worst: f64 = 0.0;
        for &q in &qs {
            for &d in &d_grid {
                let (g, bound) = decorrelation_sum_bound(q, d, prof).unwrap();
                let g_direct: f64 = (1..q).map(|j| j as f64 * closed(j as f64 * d)).sum();
                note((g - g_direct).abs() <= 1e-12 * g_direct, "g matches its closed form");
                let from_zero = (q - 1) as f64 * prof.integral_from_zero / d;
                if g > from_zero * (1.0 + SUM_BOUND_REL_SLACK) {
                    note(false, &format!("g <= (q-1) int_0^inf f / D ({name})"));
                }
                worst = worst.max(g / bound);
            }
        }
        if worst > 1.0 + SUM_BOUND_REL_SLACK {
            if *required {
                note(false, &format!("g <= (q-1) I(f) / D ({name}, max g/bound {worst:.4})"));
            } else {
                counterexamples.push(format!("{name}: max g/bound {worst:.3}"));
            }
        }
    }

    let one = [[1.0; 4]; 4];
    note(gaussian_fourth_moment(&one).unwrap() == 3.0, "E Z^4 = 3");

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{INVARIANT_TRIALS} randomized estimator trials; g bound over q in 2..=200 x {} D in [0.01, 10] \
                 for {} profiles; I(f) = int_1^inf f fails only for faster decay [{}]",
                d_grid.len(),
                profiles.len(),
                counterexamples.join(", ")
            )
        } else {
            format!("violated: {}", failures.join("; "))
        },
    )
}

fn criterion_8() -> Outcome {
    let ens = run("ou-mean-rate");
    let (mu, _, _) = ou_of(&ens.config);
    let mut l2 = Vec::new();
    let mut l4 = Vec::new();
    for (e, p) in ens.points.iter().enumerate() {
        let span = p.scheme.span();
        let recs = ens.records_at(e);
        l2.push((span, lp(recs.iter().map(|r| r.mean_x[0] - mu), 2)));
        l4.push((span, lp(recs.iter().map(|r| r.mean_x[0] - mu), 4)));
    }
    let s2 = loglog_slope(&l2);
    let s4 = loglog_slope(&l4);
    let ok2 = (s2 - MEAN_L2_SLOPE_TARGET).abs() <= MEAN_SLOPE_TOL;
    let ok4 = (s4 - MEAN_L4_SLOPE_TARGET).abs() <= MEAN_SLOPE_TOL;
    outcome(
        ok2 && ok4,
        format!(
            "spans {:?}; L2 slope {s2:.4} (target {MEAN_L2_SLOPE_TARGET} +/- {MEAN_SLOPE_TOL}: {}), \
             L4 slope {s4:.4} (target {MEAN_L4_SLOPE_TARGET} +/- {MEAN_SLOPE_TOL}: {})",
            l2.iter().map(|p| format!("{:.1}", p.0)).collect::<Vec<_>>(),
            if ok2 { "ok" } else { "out" },
            if ok4 { "ok" } else { "out" },
        ),
    )
}

fn record(results: &mut Vec<(u32, Outcome)>, id: u32, title: &str, o: Outcome, secs: f64) {
    println!(
        "[{}] criterion {id}: {title} -- {} ({secs:.1}s)",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail
    );
    results.push((id, o));
}

fn main() -> ExitCode {
    let mut results = Vec::new();

    let t = Instant::now();
    let (c1, c2) = criteria_1_and_2();
    let secs = t.elapsed().as_secs_f64();
    record(&mut results, 1, "rate exponent -1/3 of the hidden covariance error", c1, secs);
    record(&mut results, 2, "Monte Carlo error under the theoretical bound", c2, secs);

    let rest: [(u32, &str, fn() -> Outcome); 6] = [
        (3, "paired perturbation gap under 4 nu rho, linear in rho", criterion_3),
        (4, "optimized-scheme observable error tracks rho", criterion_4),
        (5, "OU parameter round trip and end-to-end recovery", criterion_5),
        (6, "Heston pipeline from realized volatility", criterion_6),
        (7, "exact algebraic invariants", criterion_7),
        (8, "empirical-mean rates in L2 and L4", criterion_8),
    ];
    for (id, title, f) in rest {
        let t = Instant::now();
        let o = f();
        record(&mut results, id, title, o, t.elapsed().as_secs_f64());
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.passed).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
