//! JSON run configuration shared by all subcommands.

use std::path::Path;

use anyhow::{Context, Result};
use luva::trainer::TrainConfig;
use luva::SystemParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub system: SystemParams,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(p) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        cfg.system.validate()?;
        Ok(cfg)
    }
}
