//! The JSON summary every subcommand writes next to its tables.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, ErrorCode};
use crate::manifest::RunManifest;

#[derive(Serialize)]
pub struct Summary {
    pub subcommand: String,
    /// SHA-256 over the manifest body and every input file.
    pub inputs_hash: String,
    pub parameters: serde_json::Value,
    pub headline: serde_json::Value,
    pub wall_time_s: f64,
}

pub struct SummaryBuilder {
    start: Instant,
    manifest: RunManifest,
    inputs_hash: String,
}

impl SummaryBuilder {
    pub fn start(manifest: &RunManifest) -> Result<Self, CliError> {
        let mut hasher = Sha256::new();
        hasher.update(
            serde_json::to_vec(manifest).map_err(|e| {
                CliError::new(ErrorCode::Input, format!("manifest rehash: {e}"))
            })?,
        );
        for (role, path) in &manifest.inputs {
            hasher.update(role.as_bytes());
            let bytes = std::fs::read(path).map_err(|e| {
                CliError::new(
                    ErrorCode::Input,
                    format!("cannot read input {}: {e}", path.display()),
                )
            })?;
            hasher.update(&bytes);
        }
        Ok(Self {
            start: Instant::now(),
            manifest: manifest.clone(),
            inputs_hash: format!("{:x}", hasher.finalize()),
        })
    }

    pub fn finish(self, headline: serde_json::Value, dir: &Path) -> Result<(), CliError> {
        let summary = Summary {
            subcommand: self.manifest.subcommand.clone(),
            inputs_hash: self.inputs_hash,
            parameters: self.manifest.params.clone(),
            headline,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::new(ErrorCode::Input, format!("summary: {e}")))?;
        std::fs::write(dir.join("summary.json"), text).map_err(|e| {
            CliError::new(ErrorCode::Input, format!("cannot write summary: {e}"))
        })?;
        Ok(())
    }
}
