use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Curriculum stage: cold start, reasoning alignment, reward optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingStage {
    Stage1,
    Stage2,
    Stage3,
}

impl fmt::Display for TrainingStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingStage::Stage1 => "stage1",
            TrainingStage::Stage2 => "stage2",
            TrainingStage::Stage3 => "stage3",
        })
    }
}

impl FromStr for TrainingStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stage1" | "1" => Ok(TrainingStage::Stage1),
            "stage2" | "2" => Ok(TrainingStage::Stage2),
            "stage3" | "3" => Ok(TrainingStage::Stage3),
            other => Err(Error::invalid(format!("unknown stage `{other}`"))),
        }
    }
}
