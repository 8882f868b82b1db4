//! Provenance record written alongside every output.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and get identical output bytes: the
/// artifact version, the fully resolved configuration (defaults and flags
/// applied), the seed and the digests of the input files. The timing fields
/// are informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub arguments: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub config: toml::Table,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct ManifestBuilder {
    subcommand: &'static str,
    inputs: Vec<InputDigest>,
    started: SystemTime,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn start(subcommand: &'static str) -> Self {
        Self { subcommand, inputs: Vec::new(), started: SystemTime::now(), clock: Instant::now() }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn finish<C: Serialize>(self, config: &C, seed: Option<u64>) -> CliResult<RunManifest> {
        let config = toml::Table::try_from(config)
            .map_err(|e| CliError::input(format!("cannot record the configuration: {e}")))?;
        Ok(RunManifest {
            subcommand: self.subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            arguments: std::env::args().collect(),
            inputs: self.inputs,
            config,
            started_unix_seconds: self.started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
        })
    }
}

/// `<output>.manifest.toml` next to a file output.
pub fn sidecar(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.toml");
    output.with_file_name(name)
}

pub fn write(path: &Path, manifest: &RunManifest) -> CliResult<()> {
    let text = toml::to_string(manifest).map_err(|e| CliError::input(format!("cannot encode the manifest: {e}")))?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
