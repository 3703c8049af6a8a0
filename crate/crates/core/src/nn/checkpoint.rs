//! JSON checkpoints: the network config plus row-major layer matrices.
//! Doubles are written in shortest round-trip form, so loading restores
//! every parameter bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, Dense, NetConfig};
use crate::error::Result;

const FORMAT: &str = "poolal-classifier";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: NetConfig,
    layers: Vec<Dense>,
}

impl Classifier {
    pub fn to_checkpoint_string(&self) -> Result<String> {
        let ckpt = Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            config: self.config.clone(),
            layers: self.layers.clone(),
        };
        Ok(serde_json::to_string_pretty(&ckpt)?)
    }

    pub fn from_checkpoint_str(s: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(s)?;
        if ckpt.format != FORMAT || ckpt.version != VERSION {
            return Err(crate::Error::Config(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        Classifier::from_layers(ckpt.config, ckpt.layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_checkpoint_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_str(&fs::read_to_string(path)?)
    }
}
