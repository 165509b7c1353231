use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::Network;
use super::optim::Adam;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "stackplay-network";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Softmax head labels, in output order.
    pub class_names: Vec<String>,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

/// Network, optimizer state and training metadata as one JSON document.
/// Layout is described in the repository README.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format: String,
    pub version: u32,
    pub network: Network,
    pub optimizer: Option<Adam>,
    pub meta: TrainMeta,
}

impl NetworkCheckpoint {
    pub fn new(network: Network, optimizer: Option<Adam>, meta: TrainMeta) -> Self {
        NetworkCheckpoint { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, network, optimizer, meta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{} (want {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                self.format, self.version
            )));
        }
        self.network.validate()?;
        if !self.meta.class_names.is_empty() && self.meta.class_names.len() != self.network.output_dim() {
            return Err(Error::Format(format!(
                "{} class names for a {}-way head",
                self.meta.class_names.len(),
                self.network.output_dim()
            )));
        }
        if let Some(opt) = &self.optimizer {
            let ok = opt.moments.len() == self.network.layers.len()
                && opt.moments.iter().zip(&self.network.layers).all(|(m, l)| {
                    m.m_w.len() == l.weights.len()
                        && m.v_w.len() == l.weights.len()
                        && m.m_b.len() == l.bias.len()
                        && m.v_b.len() == l.bias.len()
                });
            if !ok {
                return Err(Error::Format("optimizer moments do not match layer shapes".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: NetworkCheckpoint = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        NetworkCheckpoint::from_json(&std::fs::read_to_string(path)?)
    }
}
