use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::{Direction, RoundStats};
use crate::io::{append_jsonl, read_jsonl, write_atomic};

pub const MODEL_FILE: &str = "model.json";
pub const STATS_FILE: &str = "round_stats.jsonl";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path}: {source}")]
    Format {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// `{root}/{run_id}/round_{k}/{lh,hl}/model.json` plus `{root}/{run_id}/round_stats.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointDir {
    run_dir: PathBuf,
}

impl CheckpointDir {
    pub fn new(root: &Path, run_id: &str) -> Self {
        Self {
            run_dir: root.join(run_id),
        }
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn model_path(&self, round: usize, direction: Direction) -> PathBuf {
        self.run_dir
            .join(format!("round_{round}"))
            .join(direction.short())
            .join(MODEL_FILE)
    }

    pub fn save_round<M: Serialize>(
        &self,
        round: usize,
        lh: &M,
        hl: &M,
        stats: &RoundStats,
    ) -> Result<(), CheckpointError> {
        for (direction, model) in [(Direction::LowToHigh, lh), (Direction::HighToLow, hl)] {
            let path = self.model_path(round, direction);
            let bytes = serde_json::to_vec(model).map_err(|source| CheckpointError::Format {
                path: path.display().to_string(),
                source,
            })?;
            write_atomic(&path, &bytes).map_err(|source| CheckpointError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        let path = self.run_dir.join(STATS_FILE);
        append_jsonl(&path, stats).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn round_stats(&self) -> Result<Vec<RoundStats>, CheckpointError> {
        let path = self.run_dir.join(STATS_FILE);
        read_jsonl(&path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Load a model file, or `model.json` inside a directory.
pub fn load_model<M: DeserializeOwned>(path: &Path) -> Result<M, CheckpointError> {
    let file = if path.is_dir() { path.join(MODEL_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|source| CheckpointError::Io {
        path: file.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CheckpointError::Format {
        path: file.display().to_string(),
        source,
    })
}
