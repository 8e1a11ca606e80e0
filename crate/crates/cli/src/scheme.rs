use std::path::PathBuf;

use clap::Args;
use indobs::models::OUParams;
use indobs::scheduler::{bound_report, optimized_scheme, ou_bound_inputs, scheme_from_n, BoundInputs, BoundReport};
use indobs::{Error, SubsamplingScheme};
use serde::Serialize;

use crate::manifest::{manifest_path_for, RunManifest};
use crate::simulate::read_config_text;
use crate::{exit, CliError, CliResult, GlobalArgs};

#[derive(Debug, Args)]
pub struct SchemeArgs {
    /// Approximation speed rho in (0, 1).
    #[arg(long)]
    rho: Option<f64>,
    /// Number of observations (at least 8).
    #[arg(long)]
    n_obs: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    c_n: f64,
    #[arg(long, default_value_t = 1.0)]
    c_delta: f64,
    /// Bound inputs as a TOML file (nu, horizon_a, dim_r, profile, lipschitz_lambda).
    #[arg(long, conflicts_with = "ou")]
    bounds: Option<PathBuf>,
    /// Derive bound inputs from OU parameters `mean,reversion,noise`.
    #[arg(long, value_delimiter = ',')]
    ou: Option<Vec<f64>>,
    /// Largest lag A for --ou.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
}

#[derive(Debug, Serialize)]
struct SchemeOutput {
    scheme: SubsamplingScheme,
    rho: Option<f64>,
    span_s: f64,
    /// Observable-error bound for --rho, unobservable bound for --n-obs.
    predicted_error: Option<f64>,
    bounds: Option<BoundReport>,
}

pub fn run(global: &GlobalArgs, args: SchemeArgs) -> CliResult {
    let mut manifest = RunManifest::start("scheme");
    let inputs: Option<BoundInputs> = match (&args.bounds, &args.ou) {
        (Some(path), _) => {
            let text = read_config_text(path)?;
            let b: BoundInputs =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            b.validate()?;
            manifest = manifest.with_config(Some(path), &text);
            Some(b)
        }
        (None, Some(p)) if p.len() != 3 => {
            return Err(CliError::Usage(format!("--ou takes mean,reversion,noise (got {} values)", p.len())))
        }
        (None, Some(p)) => Some(ou_bound_inputs(&OUParams::new(p[0], p[1], p[2])?, args.horizon)?),
        (None, None) => None,
    };
    let (scheme, rho, family_c) = match (args.rho, args.n_obs) {
        (Some(rho), None) => (optimized_scheme(rho, args.c_n, args.c_delta)?, Some(rho), args.c_delta * args.c_n.cbrt()),
        (None, Some(n)) => (scheme_from_n(n, args.c_delta)?, None, args.c_delta),
        _ => return Err(CliError::Usage("give exactly one of --rho or --n-obs".into())),
    };
    let bounds = match &inputs {
        Some(b) => Some(bound_report(b, &scheme, rho, family_c)?),
        None => None,
    };
    let predicted_error = bounds
        .as_ref()
        .map(|b| b.observable_bound.unwrap_or(b.unobservable_bound));
    let out = SchemeOutput {
        span_s: scheme.span(),
        scheme,
        rho,
        predicted_error,
        bounds,
    };
    let json = serde_json::to_string_pretty(&out).expect("scheme serializes") + "\n";
    print!("{json}");
    if let Some(path) = &global.output {
        std::fs::write(path, &json)?;
        manifest.outputs = vec![path.clone()];
        manifest.write(&manifest_path_for(path))?;
    }
    Ok(exit::OK)
}
