//! On-disk layout under the artifact root.
//!
//! ```text
//! <root>/manifest.json
//! <root>/originals/<original hash>/{model.json, split.csv, split.json, train.json, config.txt}
//! <root>/runs/<config hash>/{config.json, config.txt, model.json, trace.csv, report.json, timing.json}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use unlearnkit::data::{import_split, DatasetSplit, SynthSpec};
use unlearnkit::nn::Model;
use unlearnkit::unlearn::{TrainConfig, TrainedModel};

use crate::config::RunConfig;

pub const ROOT_ENV: &str = "UNLEARNKIT_ROOT";
pub const DEFAULT_ROOT: &str = "artifacts";

pub const RUN_FILES: &[&str] = &["config.json", "config.txt", "model.json", "trace.csv", "report.json", "timing.json"];
pub const ORIGINAL_FILES: &[&str] = &["model.json", "split.csv", "split.json", "train.json", "config.txt"];

#[derive(Clone, Debug)]
pub struct Root(PathBuf);

impl Root {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Root(path.into())
    }

    pub fn path(&self) -> &Path {
        &self.0
    }

    pub fn manifest(&self) -> PathBuf {
        self.0.join("manifest.json")
    }

    pub fn original_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.0.join("originals").join(cfg.original_hash())
    }

    pub fn run_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.0.join("runs").join(cfg.hash())
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.0.join("runs")
    }

    /// Path relative to the root, for the manifest.
    pub fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.0).unwrap_or(p).to_string_lossy().replace('\\', "/")
    }
}

/// What `train` records next to the original checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub data: SynthSpec,
    pub recipe: TrainConfig,
    /// Measured training seconds; the wall-time budget for unlearning.
    pub seconds: f64,
    pub flos: f64,
}

/// Measured, non-deterministic timings of a run. Kept out of the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub unlearn_seconds: f64,
    pub original_train_seconds: f64,
    pub flos: f64,
    pub trainable_params: usize,
}

pub fn original_exists(dir: &Path) -> bool {
    ORIGINAL_FILES.iter().all(|f| dir.join(f).is_file())
}

pub fn run_complete(dir: &Path) -> bool {
    RUN_FILES.iter().all(|f| dir.join(f).is_file())
}

/// Loads the original model and its split, failing with a resolution error
/// when the checkpoint has not been trained yet.
pub fn load_original(root: &Root, cfg: &RunConfig) -> anyhow::Result<(TrainedModel, DatasetSplit)> {
    let dir = root.original_dir(cfg);
    let model_path = dir.join("model.json");
    if !model_path.is_file() {
        return Err(unlearnkit::Error::Resolution { what: "original checkpoint (run `train` first)", path: model_path }.into());
    }
    let model = Model::load(&model_path)?;
    let record_path = dir.join("train.json");
    let record: TrainRecord = read_json(&record_path)
        .map_err(|_| unlearnkit::Error::Resolution { what: "training record", path: record_path })?;
    let split_csv = dir.join("split.csv");
    if !split_csv.is_file() {
        return Err(unlearnkit::Error::Resolution { what: "split", path: split_csv }.into());
    }
    let split = import_split(&split_csv, &dir.join("split.json"))?;
    let trained = TrainedModel { model, recipe: record.recipe, seconds: record.seconds, flos: record.flos };
    Ok((trained, split))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
