//! Run manifest written next to every training run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tae_core::TrainConfig;

use crate::checkpoint::ConfigRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(role: &str, path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        let path = fs::canonicalize(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            role: role.to_string(),
            path,
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(&data)),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub seed: u64,
    pub config: ConfigRecord,
    pub inputs: Vec<InputDigest>,
    /// Checkpoint this run resumed from, if any.
    pub resumed_from: Option<InputDigest>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
}

pub fn now_unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: &TrainConfig, inputs: Vec<InputDigest>, resumed_from: Option<InputDigest>) -> Self {
        Self {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: ConfigRecord::from(config),
            inputs,
            resumed_from,
            started_unix_ms: now_unix_ms(),
            finished_unix_ms: None,
        }
    }

    pub fn input(&self, role: &str) -> Option<&InputDigest> {
        self.inputs.iter().find(|i| i.role == role)
    }

    /// Re-hashes every recorded input and reports the first that changed.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = InputDigest::of(&input.role, &input.path)?;
            if now.sha256 != input.sha256 {
                return Err(Error::Data(format!(
                    "{} input {} changed since the run (sha256 {} != {})",
                    input.role,
                    input.path.display(),
                    now.sha256,
                    input.sha256
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}
