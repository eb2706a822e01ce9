//! Run manifests: one JSON file fully describes a batch run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, ErrorCode};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Input files by role (`medium`, `config`, ...), relative to the
    /// manifest location unless absolute.
    #[serde(default)]
    pub inputs: BTreeMap<String, PathBuf>,
    /// Subcommand-specific parameters.
    #[serde(default)]
    pub params: serde_json::Value,
    pub output_dir: PathBuf,
    /// Seed for the randomized placement mode.
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `EFFMED_THREADS` overrides. Results never depend
    /// on this, only the wall time does.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Populate the `seconds` column of timing-bearing CSVs. Off by
    /// default so repeated runs produce byte-identical tables.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative residual bound for all linear solves.
    pub solver_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver_residual: 1e-10,
        }
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::new(
                ErrorCode::Input,
                format!("cannot read manifest {}: {e}", path.display()),
            )
        })?;
        let mut manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
            CliError::new(ErrorCode::Input, format!("manifest JSON: {e}"))
        })?;
        // Resolve relative paths against the manifest's directory.
        if let Some(dir) = path.parent() {
            for p in manifest.inputs.values_mut() {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            }
            if manifest.output_dir.is_relative() {
                manifest.output_dir = dir.join(&manifest.output_dir);
            }
        }
        if manifest.tolerances.solver_residual <= 0.0 {
            return Err(CliError::new(
                ErrorCode::Input,
                "tolerances.solver_residual must be positive",
            ));
        }
        Ok(manifest)
    }

    pub fn input(&self, role: &str) -> Result<&Path, CliError> {
        let path = self.inputs.get(role).ok_or_else(|| {
            CliError::new(
                ErrorCode::Input,
                format!("manifest is missing the {role:?} input"),
            )
        })?;
        if !path.exists() {
            return Err(CliError::new(
                ErrorCode::Input,
                format!("input file {} does not exist", path.display()),
            ));
        }
        Ok(path)
    }

    /// Typed view of `params`.
    pub fn params<P: serde::de::DeserializeOwned>(&self) -> Result<P, CliError> {
        serde_json::from_value(self.params.clone()).map_err(|e| {
            CliError::new(
                ErrorCode::Input,
                format!("params for {}: {e}", self.subcommand),
            )
        })
    }
}
