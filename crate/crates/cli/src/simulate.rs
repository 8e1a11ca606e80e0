use std::path::{Path, PathBuf};

use clap::Args;
use indobs::models::ModelSpec;
use indobs::trajectory_io::write_trajectory;
use indobs::{Error, RandomStreamSpec, StreamRole};
use serde::Deserialize;

use crate::manifest::{manifest_path_for, RunManifest};
use crate::{exit, CliResult, GlobalArgs};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Number of fine steps; overrides the config.
    #[arg(long)]
    length: Option<usize>,
}

/// ```toml
/// master_seed = 1
/// length = 1000
/// delta = 0.01
/// [model]
/// kind = "ou"
/// mean = 0.0
/// reversion = 1.0
/// noise = 1.0
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationConfig {
    master_seed: u64,
    #[serde(default)]
    replication: u64,
    length: usize,
    delta: f64,
    #[serde(default)]
    burn_in: Option<usize>,
    model: ModelSpec,
}

pub fn read_config_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(e).with_context(format!("reading {}", path.display())))
}

fn sibling(output: &Path, name: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = match output.extension() {
        Some(ext) => format!("{stem}-{name}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{name}"),
    };
    output.with_file_name(file)
}

pub fn run(global: &GlobalArgs, args: SimulateArgs) -> CliResult {
    let manifest = RunManifest::start("simulate");
    let text = read_config_text(&args.config)?;
    let mut cfg: SimulationConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    cfg.model.validate()?;
    if let Some(seed) = global.seed {
        cfg.master_seed = seed;
    }
    if let Some(len) = args.length {
        cfg.length = len;
    }
    let stream = RandomStreamSpec::new(cfg.master_seed, cfg.replication, StreamRole::ProcessNoise);
    let paths = cfg.model.simulate(cfg.length, cfg.delta, &stream, cfg.burn_in)?;

    let output = global.output.clone().unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    let mut outputs = vec![output.clone()];
    write_trajectory(&output, &paths.hidden)?;
    for (name, grid) in &paths.companions {
        let p = sibling(&output, name);
        write_trajectory(&p, grid)?;
        outputs.push(p);
    }
    let mut manifest = manifest.with_config(Some(&args.config), &text);
    manifest.master_seed = Some(cfg.master_seed);
    manifest.outputs = outputs;
    manifest.write(&manifest_path_for(&output))?;
    Ok(exit::OK)
}
