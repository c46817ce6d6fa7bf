//! Versioned model checkpoints.
//!
//! Structured-text (JSON) dump of every weight matrix, center, radius and
//! momentum buffer. Floats are written in shortest round-trip form, so a
//! reloaded model is bit-identical to the saved one.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LambdaTuner, MlpEstimator, RbfEstimator};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Any model the toolkit can persist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelCheckpoint {
    Mlp(MlpEstimator),
    Rbf(RbfEstimator),
    Tuner(LambdaTuner),
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    model: ModelCheckpoint,
}

#[derive(Debug)]
pub enum CheckpointError {
    Io(std::io::Error),
    Format(String),
    Version { found: u32, expected: u32 },
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "checkpoint io error: {e}"),
            Self::Format(e) => write!(f, "checkpoint format error: {e}"),
            Self::Version { found, expected } => {
                write!(f, "checkpoint version {found}, expected {expected}")
            }
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<std::io::Error> for CheckpointError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

pub fn save_checkpoint(path: &Path, model: &ModelCheckpoint) -> Result<(), CheckpointError> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let text =
        serde_json::to_string_pretty(&file).map_err(|e| CheckpointError::Format(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint, CheckpointError> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| CheckpointError::Format(e.to_string()))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            found: file.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    Ok(file.model)
}
