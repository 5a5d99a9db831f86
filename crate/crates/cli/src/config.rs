//! Run configuration: parameter source, `key=value` overrides and the
//! subcommand arguments, echoed verbatim into every output directory.

use std::path::{Path, PathBuf};

use enso_mz::PhysicalParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    /// `default` or a path to a parameter file.
    pub params: String,
    pub overrides: Vec<String>,
    pub out: Option<PathBuf>,
    /// Every command is free of random seeds; kept for the echo.
    pub deterministic: bool,
    pub args: serde_json::Value,
}

/// Splits `key=value`. Keys are parameter names, optionally under `params.`.
pub fn parse_override(s: &str) -> CliResult<(String, f64)> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{s}` is not of the form key=value")))?;
    let key = key.trim();
    let key = key.strip_prefix("params.").unwrap_or(key);
    if key.is_empty() || key.contains('.') {
        return Err(CliError::Usage(format!("unknown override key `{key}`")));
    }
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("override `{s}`: `{value}` is not a number")))?;
    Ok((key.to_string(), v))
}

pub fn load_params(source: &str, overrides: &[String]) -> CliResult<PhysicalParams> {
    let base = if source == "default" {
        PhysicalParams::default()
    } else {
        let text = std::fs::read_to_string(Path::new(source))
            .map_err(|e| CliError::Usage(format!("cannot read parameter file `{source}`: {e}")))?;
        PhysicalParams::from_json_str(&text)?
    };
    let parsed = overrides.iter().map(|s| parse_override(s)).collect::<CliResult<Vec<_>>>()?;
    Ok(base.with_overrides(parsed.iter().map(|(k, v)| (k.as_str(), *v)))?)
}
