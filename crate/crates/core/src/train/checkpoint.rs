use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierParams, PhiParams, TrainSchedule};
use crate::autodiff::AdamState;
use crate::structure::{EstimatorConfig, ThetaParams};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Random-stream position. Streams are counter-addressed, so the seed and
/// the number of completed epochs determine every later draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub epochs_completed: usize,
}

/// All parameters and optimizer moments at the end of a run, with the
/// selected classifier snapshot as `omega`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub schedule: TrainSchedule,
    pub estimator: EstimatorConfig,
    pub theta: ThetaParams,
    pub phi: PhiParams,
    pub omega: ClassifierParams,
    pub adam_theta: AdamState,
    pub adam_phi: AdamState,
    pub adam_omega: AdamState,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let checkpoint: Checkpoint = serde_json::from_str(&text)?;
        if checkpoint.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                checkpoint.version
            )));
        }
        Ok(checkpoint)
    }
}
