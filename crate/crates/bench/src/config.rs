//! JSON configuration shared by the subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use aeos_core::schedulers::{AnnotateConfig, HillClimbConfig};
use aeos_core::sim::SimConfig;
use aeos_matcher::train::{ExploreConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub annotate: AnnotateConfig,
    pub hillclimb: HillClimbConfig,
    pub train: TrainConfig,
    pub explore: ExploreConfig,
    pub random_decision_interval: usize,
    pub matcher_decision_interval: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            annotate: AnnotateConfig::default(),
            hillclimb: HillClimbConfig::default(),
            train: TrainConfig::default(),
            explore: ExploreConfig::default(),
            random_decision_interval: 60,
            matcher_decision_interval: 1,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }
}
