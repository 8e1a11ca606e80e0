//! Bundled experiment configs, one per acceptance experiment.

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("ou-rate", include_str!("../../presets/ou-rate.toml")),
    ("perturbation-gap", include_str!("../../presets/perturbation-gap.toml")),
    ("optimized-sweep", include_str!("../../presets/optimized-sweep.toml")),
    ("ou-estimation", include_str!("../../presets/ou-estimation.toml")),
    ("heston", include_str!("../../presets/heston.toml")),
    ("ou-mean-rate", include_str!("../../presets/ou-mean-rate.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown preset '{name}' (known: {})", preset_names().join(", "))))
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml(preset_text(name)?).map_err(|e| e.with_context(format!("preset '{name}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::engine::plan_points;

    #[test]
    fn every_preset_parses_and_plans() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.name, name);
            assert!(!cfg.checks.is_empty(), "{name}");
            plan_points(&cfg).unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn rate_preset_uses_the_cube_root_family() {
        let pts = plan_points(&preset("ou-rate").unwrap()).unwrap();
        let spans: Vec<f64> = pts.iter().map(|p| p.scheme.span()).collect();
        for (p, n) in pts.iter().zip([1e3f64, 1e4, 1e5, 1e6]) {
            assert!((p.scheme.big_delta - n.powf(-1.0 / 3.0)).abs() < 1e-12);
        }
        assert!(spans.windows(2).all(|w| w[1] > w[0]));
        let mean = plan_points(&preset("ou-mean-rate").unwrap()).unwrap();
        for (p, s) in mean.iter().zip([10.0, 100.0, 1000.0]) {
            assert!((p.scheme.span() / s - 1.0).abs() < 0.01, "{}", p.scheme.span());
        }
    }
}
