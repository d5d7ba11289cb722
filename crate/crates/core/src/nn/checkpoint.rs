use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::RmsProp;
use super::tensor::Tensor;
use super::{NetConfig, NnError, PolicyNet};
use crate::hash::hash_bytes;
use crate::sim::Force;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Network configuration, parameters, optimizer state and training
/// progress in one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: NetConfig,
    /// The force the policy was trained to command.
    pub controlled: Force,
    pub tensors: Vec<(String, Tensor)>,
    pub optimizer: Option<RmsProp>,
    pub step: u64,
    pub rolling_reward: Option<f64>,
}

impl Checkpoint {
    pub fn new(net: &PolicyNet, controlled: Force, optimizer: Option<&RmsProp>, step: u64) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config: net.config().clone(),
            controlled,
            tensors: net.tensors(),
            optimizer: optimizer.cloned(),
            step,
            rolling_reward: None,
        }
    }

    pub fn net(&self) -> Result<PolicyNet, NnError> {
        PolicyNet::from_tensors(self.config.clone(), &self.tensors)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, NnError> {
        let c: Self = serde_json::from_str(s).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported checkpoint version {}", c.version)));
        }
        Ok(c)
    }

    /// Stable digest of the serialized form.
    pub fn digest(&self) -> u64 {
        hash_bytes(self.to_json().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_json()).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let s = fs::read_to_string(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}
