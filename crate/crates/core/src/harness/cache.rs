//! On-disk cache of trained models keyed by a hash of their inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::sha256_hex;
use crate::error::Result;
use crate::tagger::{checkpoint, TaggerModel, TrainReport};

#[derive(Debug, Clone)]
pub struct ModelCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Losses {
    seed: u64,
    epoch_losses: Vec<f64>,
}

impl ModelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ModelCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Content key from a JSON description of every training input.
    pub fn key(inputs: &serde_json::Value) -> String {
        sha256_hex(inputs.to_string().as_bytes())
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.model.json")), self.dir.join(format!("{key}.losses.json")))
    }

    /// A cached report, or `None` on a miss or an unreadable entry.
    pub fn get(&self, key: &str) -> Option<TrainReport> {
        let (model, losses) = self.paths(key);
        let model: TaggerModel = checkpoint::load(&model).ok()?;
        let losses: Losses = serde_json::from_str(&std::fs::read_to_string(losses).ok()?).ok()?;
        Some(TrainReport {
            epoch_losses: losses.epoch_losses,
            model,
            seed: losses.seed,
        })
    }

    pub fn put(&self, key: &str, report: &TrainReport) -> Result<()> {
        let (model, losses) = self.paths(key);
        checkpoint::save(&report.model, &model)?;
        let l = Losses {
            seed: report.seed,
            epoch_losses: report.epoch_losses.clone(),
        };
        std::fs::write(losses, serde_json::to_string(&l)?)?;
        Ok(())
    }

    /// Returns the cached report for `inputs` or runs `train` and stores it.
    pub fn get_or_train(&self, inputs: &serde_json::Value, train: impl FnOnce() -> Result<TrainReport>) -> Result<TrainReport> {
        let key = ModelCache::key(inputs);
        if let Some(hit) = self.get(&key) {
            log::info!("model cache hit {key}");
            return Ok(hit);
        }
        let report = train()?;
        self.put(&key, &report)?;
        Ok(report)
    }
}
