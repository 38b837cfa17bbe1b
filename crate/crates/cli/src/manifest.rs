use serde::Serialize;
use serde_json::Value;

/// Provenance block embedded in every emitted result file.
///
/// Re-running a command with an identical manifest (same command, config
/// echo, and seed) reproduces numerically identical primary outputs;
/// only the timestamps differ.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_echo: Value,
    pub seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
}

pub struct ManifestBuilder {
    command: String,
    config_echo: Value,
    seed: u64,
    started: chrono::DateTime<chrono::Utc>,
}

impl ManifestBuilder {
    pub fn start(command: &str, config_echo: Value, seed: u64) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config_echo,
            seed,
            started: chrono::Utc::now(),
        }
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            command: self.command,
            config_echo: self.config_echo,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: self.started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
        }
    }
}
