//! Run configuration shared by the command-line tools, loadable from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::synth::SynthConfig;
use crate::pipeline::{EvalSettings, TrainSettings, TuneGrid};
use crate::tracker::{Similarity, TrackerConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub train_stream: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_stream: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

/// Tracker settings as written in a config file; the gate defaults by similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerSection {
    pub similarity: Similarity,
    pub gate: Option<f64>,
    pub max_misses: u32,
    pub min_hits: u32,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let d = TrackerConfig::default();
        Self {
            similarity: d.similarity,
            gate: None,
            max_misses: d.max_misses,
            min_hits: d.min_hits,
        }
    }
}

impl TrackerSection {
    pub fn build(&self) -> TrackerConfig {
        let base = TrackerConfig::with_similarity(self.similarity);
        TrackerConfig {
            gate: self.gate.unwrap_or(base.gate),
            max_misses: self.max_misses,
            min_hits: self.min_hits,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub layout: String,
    pub train: TrainSettings,
    pub tracker: TrackerSection,
    pub eval: EvalSettings,
    pub synth: SynthConfig,
    pub tune: TuneGrid,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            layout: "openpose18".into(),
            train: TrainSettings::default(),
            tracker: TrackerSection::default(),
            eval: EvalSettings::default(),
            synth: SynthConfig::default(),
            tune: TuneGrid::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Pushes the top-level seed and layout into every section.
    pub fn propagate(&mut self) {
        self.train.seed = self.seed;
        self.train.layout = self.layout.clone();
        self.eval.seed = self.seed;
        self.synth.seed = self.seed;
    }
}

/// Fails with a configuration error unless `path` exists.
pub fn require_path(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}
