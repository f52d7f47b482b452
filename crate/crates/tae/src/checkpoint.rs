//! Versioned binary checkpoints.
//!
//! Layout:
//!
//! ```text
//! "TAE1"                       magic, 4 bytes
//! version                      u32 little-endian
//! header_len                   u64 little-endian
//! header                       UTF-8 JSON: config, epoch, temperature,
//!                              rng state, loss history, tensor directory
//! payload                      f64 little-endian, tensors in directory order
//! ```
//!
//! Serialization is deterministic, so save → load → save reproduces the
//! same bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tae_core::params::PARAM_NAMES;
use tae_core::trainer::{EpochRecord, RngState};
use tae_core::{ModelParams, Phase, Tensor, TrainConfig, Trainer};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TAE1";
pub const VERSION: u32 = 1;

/// Everything needed to resume training or run inference.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: ModelParams,
    pub epoch: usize,
    pub temperature: f64,
    pub rng: RngState,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer) -> Self {
        Self {
            config: trainer.config().clone(),
            params: trainer.params().clone(),
            epoch: trainer.epoch(),
            temperature: trainer.temperature(),
            rng: trainer.rng_state(),
            history: trainer.history().to_vec(),
        }
    }

    pub fn into_trainer(self) -> Result<Trainer> {
        Ok(Trainer::restore(
            self.config,
            self.params,
            self.epoch,
            self.temperature,
            self.rng,
            self.history,
        )?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: ConfigRecord::from(&self.config),
            epoch: self.epoch,
            temperature: self.temperature,
            rng: RngRecord {
                seed: hex::encode(self.rng.seed),
                stream: self.rng.stream,
                word_pos: self.rng.word_pos.to_string(),
            },
            history: self
                .history
                .iter()
                .map(|r| HistoryRecord {
                    epoch: r.epoch,
                    phase: r.phase.as_char(),
                    mean_loss: r.mean_loss,
                    temperature: r.temperature,
                })
                .collect(),
            tensors: self
                .params
                .tensors()
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in self.params.tensors() {
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 {
            return Err(corrupt("truncated file"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|n| n.checked_add(16))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| Error::Checkpoint(format!("invalid header: {e}")))?;

        let config = header.config.into_config();
        config.validate()?;
        if header.tensors.len() != PARAM_NAMES.len() {
            return Err(corrupt("tensor directory has the wrong number of entries"));
        }
        let mut payload = &bytes[header_end..];
        let mut named = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            let numel: usize = entry.shape.iter().product();
            let len = numel * 8;
            if payload.len() < len {
                return Err(corrupt("truncated payload"));
            }
            let values = payload[..len]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            payload = &payload[len..];
            let name = PARAM_NAMES
                .iter()
                .find(|n| **n == entry.name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown tensor {}", entry.name)))?;
            named.push((*name, Tensor::new(entry.shape.clone(), values)?));
        }
        if !payload.is_empty() {
            return Err(corrupt("trailing bytes after payload"));
        }
        let params = ModelParams::from_named(config.embedding_dim, config.hidden_dim, named)?;

        let seed_bytes = hex::decode(&header.rng.seed).map_err(|_| corrupt("invalid rng seed"))?;
        let seed: [u8; 32] = seed_bytes.try_into().map_err(|_| corrupt("rng seed must be 32 bytes"))?;
        let word_pos = header.rng.word_pos.parse().map_err(|_| corrupt("invalid rng position"))?;
        let history = header
            .history
            .into_iter()
            .map(|r| {
                Ok(EpochRecord {
                    epoch: r.epoch,
                    phase: Phase::from_char(r.phase).ok_or_else(|| corrupt("invalid phase in history"))?,
                    mean_loss: r.mean_loss,
                    temperature: r.temperature,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if history.len() != header.epoch {
            return Err(corrupt("history length does not match epoch counter"));
        }

        Ok(Self {
            config,
            params,
            epoch: header.epoch,
            temperature: header.temperature,
            rng: RngState {
                seed,
                stream: header.rng.stream,
                word_pos,
            },
            history,
        })
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ConfigRecord,
    epoch: usize,
    temperature: f64,
    rng: RngRecord,
    history: Vec<HistoryRecord>,
    tensors: Vec<TensorEntry>,
}

/// Serialized form of a [`TrainConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    embedding_dim: usize,
    hidden_dim: usize,
    epochs: usize,
    phase_length: usize,
    learning_rate: f64,
    temperature_start: f64,
    temperature_min: f64,
    temperature_decay: f64,
    seed: u64,
    shuffle: bool,
}

impl From<&TrainConfig> for ConfigRecord {
    fn from(c: &TrainConfig) -> Self {
        Self {
            embedding_dim: c.embedding_dim,
            hidden_dim: c.hidden_dim,
            epochs: c.epochs,
            phase_length: c.phase_length,
            learning_rate: c.learning_rate,
            temperature_start: c.temperature_start,
            temperature_min: c.temperature_min,
            temperature_decay: c.temperature_decay,
            seed: c.seed,
            shuffle: c.shuffle,
        }
    }
}

impl ConfigRecord {
    pub fn into_config(self) -> TrainConfig {
        TrainConfig {
            embedding_dim: self.embedding_dim,
            hidden_dim: self.hidden_dim,
            epochs: self.epochs,
            phase_length: self.phase_length,
            learning_rate: self.learning_rate,
            temperature_start: self.temperature_start,
            temperature_min: self.temperature_min,
            temperature_decay: self.temperature_decay,
            seed: self.seed,
            shuffle: self.shuffle,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RngRecord {
    seed: String,
    stream: u64,
    // u128 does not survive JSON numbers.
    word_pos: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistoryRecord {
    epoch: usize,
    phase: char,
    mean_loss: f64,
    temperature: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Checkpoint {
        let mut config = TrainConfig::new(3);
        config.hidden_dim = 2;
        Checkpoint::from_trainer(&Trainer::new(config).unwrap())
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let ck = small();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert!(back.params.bit_eq(&ck.params));
        assert_eq!(back.rng, ck.rng);
        assert_eq!(back.config, ck.config);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn version_bump_rejected() {
        let mut bytes = small().to_bytes();
        bytes[4] += 1;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn truncation_and_magic_rejected() {
        let bytes = small().to_bytes();
        for cut in [0, 10, 20, bytes.len() - 1] {
            assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(Checkpoint::from_bytes(&long).is_err());
    }

    #[test]
    fn shape_mismatch_vs_config_rejected() {
        let ck = small();
        let bytes = ck.to_bytes();
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[16..16 + header_len]).unwrap();
        let edited = header.replacen("\"hidden_dim\":2", "\"hidden_dim\":3", 1);
        assert_ne!(edited, header);
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(edited.len() as u64).to_le_bytes());
        out.extend_from_slice(edited.as_bytes());
        out.extend_from_slice(&bytes[16 + header_len..]);
        assert!(Checkpoint::from_bytes(&out).is_err());
    }
}
