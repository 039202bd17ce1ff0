//! Run configuration for the command-line workflow.
//!
//! ```toml
//! [paths]
//! catalog = "catalog/catalog.tsv"
//! dataset = "work/dataset"
//! model = "work/model.cnnm"
//! lexicon = "lexicon.tsv"
//!
//! [segmentation]   # page and glyph preprocessing
//! [dataset]        # variants, augmentation
//! [split]          # fractions and shuffle seed
//! [model]          # init_seed and optional layer list
//! [train]          # epochs, patience, batch size, Adam
//! [gradcheck]      # finite-difference self-check
//! ```
//!
//! Every section is optional and every key has a fixed default; unknown
//! keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetConfig, SplitSpec};
use crate::error::{Error, Result};
use crate::nn::{default_layers, GradCheckConfig, LayerSpec, ModelConfig, TrainConfig};
use crate::seed::mix;
use crate::segmentation::SegmentationParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Class catalog manifest (`sign_name<TAB>image path`).
    pub catalog: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub init_seed: u64,
    /// Layer stack; the default CNN when absent.
    pub layers: Option<Vec<LayerSpec>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            init_seed: 0x5EED_0003,
            layers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSection {
    /// `[gradcheck.check]`: step, tolerance, probes per tensor, seed.
    pub check: GradCheckConfig,
    /// Input side for the configured stack; small keeps the check fast.
    pub input_side: usize,
    pub num_classes: usize,
    pub batch: usize,
    /// Additional randomly generated stacks covering every layer kind.
    pub random_instances: usize,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        Self {
            check: GradCheckConfig::default(),
            input_side: 16,
            num_classes: 5,
            batch: 4,
            random_instances: 20,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub segmentation: SegmentationParams,
    pub dataset: DatasetConfig,
    pub split: SplitSpec,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub gradcheck: GradCheckSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        self.dataset.validate()?;
        self.split.validate()?;
        self.train.validate()?;
        if let Some(layers) = &self.model.layers {
            if layers.is_empty() {
                return Err(Error::Config("model.layers is empty".into()));
            }
        }
        Ok(())
    }

    /// Replaces every seed with an independent stream of `seed`. Derived
    /// seeds are kept below 2^63 because TOML integers are signed.
    pub fn override_seeds(&mut self, seed: u64) {
        let s = |k| mix(seed, k) >> 1;
        self.dataset.variant_seed = s(1);
        self.dataset.augmentation.seed = s(2);
        self.split.seed = s(3);
        self.model.init_seed = s(4);
        self.train.shuffle_seed = s(5);
        self.gradcheck.check.seed = s(6);
    }

    /// Model description for a dataset of the given glyph size and classes.
    pub fn model_config(&self, input_side: usize, class_names: &[String]) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            input_side,
            input_channels: 1,
            num_classes: class_names.len(),
            init_seed: self.model.init_seed,
            class_names: class_names.to_vec(),
            layers: self
                .model
                .layers
                .clone()
                .unwrap_or_else(|| default_layers(class_names.len())),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolves an optional command-line path against `paths`.
    pub fn path(&self, given: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        let fallback = match key {
            "catalog" => &self.paths.catalog,
            "dataset" => &self.paths.dataset,
            "model" => &self.paths.model,
            "lexicon" => &self.paths.lexicon,
            _ => &None,
        };
        given
            .or_else(|| fallback.clone())
            .ok_or_else(|| Error::Config(format!("no {key} path given (flag or paths.{key})")))
    }
}
