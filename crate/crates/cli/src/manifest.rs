use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    command: String,
    config_sha256: String,
    wall_time_seconds: f64,
    outputs: Vec<String>,
    config: RunConfig,
}

pub fn write(dir: &Path, command: &str, config: &RunConfig, elapsed: Duration, outputs: &[String]) -> Result<(), CliError> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_sha256: config.hash(),
        wall_time_seconds: elapsed.as_secs_f64(),
        outputs: outputs.to_vec(),
        config: config.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join(FILE), text + "\n")?;
    Ok(())
}

/// The command and configuration recorded in a manifest. The stored hash
/// must match the stored configuration.
pub fn read(path: &Path) -> Result<(String, RunConfig), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("malformed manifest: {e}")))?;
    if manifest.config.hash() != manifest.config_sha256 {
        return Err(CliError::Config("manifest config does not match its recorded hash".into()));
    }
    Ok((manifest.command, manifest.config))
}
