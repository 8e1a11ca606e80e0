use std::path::PathBuf;

use clap::Args;
use indobs::lab::{
    build_report, preset, read_ensemble, resolve_bounds, run_replications, write_ensemble, ExperimentConfig,
};

use crate::manifest::RunManifest;
use crate::simulate::read_config_text;
use crate::{exit, CliError, CliResult, GlobalArgs};

#[derive(Debug, Args)]
pub struct LabArgs {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled experiment: ou-rate, perturbation-gap, optimized-sweep,
    /// ou-estimation, heston, ou-mean-rate.
    #[arg(long)]
    preset: Option<String>,
    /// Rebuild the report from a saved ensemble instead of simulating.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Number of replications; overrides the config.
    #[arg(long)]
    replications: Option<usize>,
}

pub fn run(global: &GlobalArgs, args: LabArgs) -> CliResult {
    let manifest = RunManifest::start("lab");
    let (mut cfg, text, path) = match (&args.config, &args.preset) {
        (Some(p), None) => {
            let text = read_config_text(p)?;
            let cfg = ExperimentConfig::from_toml(&text).map_err(|e| e.with_context(p.display().to_string()))?;
            (cfg, text, Some(p.clone()))
        }
        (None, Some(name)) => {
            let text = indobs::lab::presets::preset_text(name)?.to_string();
            (preset(name)?, text, None)
        }
        _ => return Err(CliError::Usage("give exactly one of --config or --preset".into())),
    };
    if let Some(seed) = global.seed {
        cfg.master_seed = seed;
    }
    if let Some(m) = args.replications {
        cfg.replications = m;
    }
    cfg.validate()?;

    let dir = global.output.clone().unwrap_or_else(|| PathBuf::from(format!("lab-{}", cfg.name)));
    std::fs::create_dir_all(&dir)?;
    let ensemble_path = dir.join("ensemble.bin");
    let ensemble = match &args.resume {
        Some(p) => read_ensemble(p, Some(&cfg))?,
        None => {
            let ens = run_replications(&cfg, global.workers)?;
            write_ensemble(&ensemble_path, &ens)?;
            ens
        }
    };
    let bounds = resolve_bounds(&cfg)?;
    let report = build_report(&ensemble, bounds.as_ref())?;
    let json_path = dir.join("report.json");
    let csv_path = dir.join("report.csv");
    std::fs::write(&json_path, report.to_json() + "\n")?;
    std::fs::write(&csv_path, report.to_csv())?;

    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let mut manifest = manifest.with_config(path.as_deref(), &text);
    manifest.master_seed = Some(cfg.master_seed);
    manifest.outputs = vec![json_path, csv_path];
    if args.resume.is_none() {
        manifest.outputs.push(ensemble_path);
    }
    manifest.write(&dir.join("manifest.json"))?;

    if global.assert_checks && !report.all_checks_pass() {
        eprintln!("acceptance checks failed");
        return Ok(exit::ASSERT_FAILED);
    }
    Ok(exit::OK)
}
