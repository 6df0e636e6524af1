//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::atomic::write_atomic;
use crate::actgraph::{NormKind, DEFAULT_SUBSET_SIZE};
use crate::error::{Error, Result};
use crate::nn::{Activation, TrainConfig};
use crate::shifts::{Intensity, IntensityLadder, ShiftFamily};
use crate::stats::DEFAULT_REPETITIONS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Dataset name; selects the built-in intensity ladder.
    #[serde(default = "default_dataset")]
    pub dataset: String,
    /// Directory holding the four IDX files.
    pub dir: PathBuf,
    /// Use only the first `n` training samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Directory of the weight manifest; trained when absent.
    pub dir: PathBuf,
    #[serde(default = "default_arch")]
    pub arch: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub hidden: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            seed: d.seed,
        }
    }
}

impl From<&TrainSection> for TrainConfig {
    fn from(t: &TrainSection) -> Self {
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            seed: t.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummariesSection {
    pub subset_size: usize,
    pub seed: u64,
}

impl Default for SummariesSection {
    fn default() -> Self {
        SummariesSection {
            subset_size: DEFAULT_SUBSET_SIZE,
            seed: 0,
        }
    }
}

/// Feature family named in a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Magdiff,
    Cv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub features: Vec<FeatureFamily>,
    /// Dense layer indices for MAGDiff features; negative counts from the output.
    #[serde(default = "default_layers")]
    pub layers: Vec<i64>,
    #[serde(default = "default_norms")]
    pub norms: Vec<NormKind>,
    pub shifts: Vec<ShiftFamily>,
    pub intensities: Vec<Intensity>,
    pub deltas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub summaries: SummariesSection,
    pub grid: GridSection,
    /// Overrides the dataset's built-in intensity ladder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<IntensityLadder>,
    pub output: OutputSection,
}

fn default_dataset() -> String {
    "mnist".into()
}

fn default_arch() -> Vec<usize> {
    vec![784, 128, 64, 32, 10]
}

fn default_hidden() -> Activation {
    Activation::Relu
}

fn default_layers() -> Vec<i64> {
    vec![-1]
}

fn default_norms() -> Vec<NormKind> {
    vec![NormKind::Frobenius]
}

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

fn default_alpha() -> f64 {
    0.05
}

fn default_prefix() -> String {
    "report".into()
}

/// One MAGDiff or CV feature requested by a grid, before layer resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureRequest {
    Magdiff { layer: i64, norm: NormKind },
    Cv,
}

/// One point of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub feature: FeatureRequest,
    pub shift: ShiftFamily,
    pub intensity: Intensity,
    pub delta: f64,
    pub sample_size: usize,
}

impl GridSection {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("features", self.features.is_empty()),
            ("shifts", self.shifts.is_empty()),
            ("intensities", self.intensities.is_empty()),
            ("deltas", self.deltas.is_empty()),
            ("sample_sizes", self.sample_sizes.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::config(format!("grid.{name} must not be empty")));
        }
        if self.features.contains(&FeatureFamily::Magdiff)
            && (self.layers.is_empty() || self.norms.is_empty())
        {
            return Err(Error::config("MAGDiff features need grid.layers and grid.norms"));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::config(format!("grid.deltas entry {d} outside [0, 1]")));
        }
        if self.sample_sizes.contains(&0) || self.repetitions == 0 {
            return Err(Error::config("sample sizes and repetitions must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Feature requests in config order: features, then layers, then norms.
    pub fn feature_requests(&self) -> Vec<FeatureRequest> {
        let mut out = Vec::new();
        for f in &self.features {
            match f {
                FeatureFamily::Cv => out.push(FeatureRequest::Cv),
                FeatureFamily::Magdiff => {
                    for &layer in &self.layers {
                        for &norm in &self.norms {
                            out.push(FeatureRequest::Magdiff { layer, norm });
                        }
                    }
                }
            }
        }
        out
    }

    /// The cartesian grid, ordered lexicographically by
    /// (feature, shift, intensity, delta, sample size) in config order.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for feature in self.feature_requests() {
            for &shift in &self.shifts {
                for &intensity in &self.intensities {
                    for &delta in &self.deltas {
                        for &sample_size in &self.sample_sizes {
                            cells.push(GridCell {
                                feature,
                                shift,
                                intensity,
                                delta,
                                sample_size,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.ladder()?.validate()
    }

    /// The configured ladder, or the dataset's built-in one.
    pub fn ladder(&self) -> Result<IntensityLadder> {
        match &self.ladder {
            Some(l) => Ok(l.clone()),
            None => IntensityLadder::for_dataset(&self.data.dataset),
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::parse(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("serialising config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_toml()?.as_bytes())
    }

    /// `ExperimentConfig` with the pinned ladder filled in, for echoing next
    /// to outputs.
    pub fn resolved(&self) -> Result<Self> {
        Ok(ExperimentConfig {
            ladder: Some(self.ladder()?),
            ..self.clone()
        })
    }
}
