//! Tool-wide defaults, loaded from an optional TOML file and overridden by
//! flags.

use std::path::{Path, PathBuf};

use passweight::advantage::AdvantageParams;
use passweight::reward::RewardParams;
use passweight::sandbox::ExecLimits;
use passweight::sim::ClipRange;
use serde::{Deserialize, Serialize};

use crate::failure::{CmdResult, Context};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Root for sandbox scratch directories; the environment variable wins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scratch_dir: Option<PathBuf>,
    /// Default output directory for files written by subcommands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub reward: RewardParams,
    pub advantage: AdvantageParams,
    pub clip: ClipRange,
    pub limits: ExecLimits,
    pub paths: Paths,
}

impl GlobalConfig {
    pub fn load(path: &Path) -> CmdResult<Self> {
        let text = std::fs::read_to_string(path).input_ctx(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).input_ctx(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
