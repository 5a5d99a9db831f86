//! Artifact assembly and the run manifest.

use std::path::Path;
use std::time::Duration;

use enso_mz::PhysicalParams;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Everything a command produced. The first artifact is the primary one and
/// goes to stdout when no output directory is given.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub artifacts: Vec<Artifact>,
    /// Set when the run completed but its check did not pass.
    pub failure: Option<String>,
}

impl Outputs {
    pub fn push(&mut self, a: Artifact) {
        self.artifacts.push(a);
    }

    pub fn get(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

/// Locale-free shortest round-trip formatting.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn csv_artifact<R, I>(name: &str, header: &[&str], rows: R) -> CliResult<Artifact>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::CliError::Io(e.to_string()))?;
    Ok(Artifact { name: name.to_string(), bytes })
}

pub fn json_artifact<T: Serialize>(name: &str, value: &T) -> CliResult<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.to_string(), bytes })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct ArtifactEntry<'a> {
    file: &'a str,
    sha256: String,
    bytes: usize,
    inputs_sha256: &'a str,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    inputs_sha256: String,
    params: &'a PhysicalParams,
    config: &'a RunConfig,
    artifacts: Vec<ArtifactEntry<'a>>,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct Inputs<'a> {
    config: &'a RunConfig,
    params: &'a PhysicalParams,
}

/// Hash of the resolved inputs: config echo without the output location plus
/// the parameter set after overrides.
pub fn inputs_hash(config: &RunConfig, params: &PhysicalParams) -> String {
    let config = &RunConfig { out: None, ..config.clone() };
    let bytes = serde_json::to_vec(&Inputs { config, params }).expect("inputs serialize");
    sha256_hex(&bytes)
}

/// Writes artifacts, `config.json` and `manifest.json` into `dir`.
pub fn write_dir(
    dir: &Path,
    outputs: &Outputs,
    config: &RunConfig,
    params: &PhysicalParams,
    wall: Duration,
) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    let inputs = inputs_hash(config, params);
    let echo = json_artifact("config.json", &Inputs { config, params })?;
    let mut entries = Vec::new();
    for a in outputs.artifacts.iter().chain(std::iter::once(&echo)) {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
        entries.push(ArtifactEntry { file: &a.name, sha256: sha256_hex(&a.bytes), bytes: a.bytes.len(), inputs_sha256: &inputs });
    }
    let manifest = Manifest {
        tool: "enso-mz",
        version: env!("CARGO_PKG_VERSION"),
        command: &config.command,
        inputs_sha256: inputs.clone(),
        params,
        config,
        artifacts: entries,
        wall_time_seconds: wall.as_secs_f64(),
    };
    let m = json_artifact("manifest.json", &manifest)?;
    std::fs::write(dir.join(&m.name), &m.bytes)?;
    Ok(())
}
