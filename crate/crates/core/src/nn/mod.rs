//! Convolutional glyph classifier written from scratch: layers, loss,
//! backpropagation, Adam, early-stopped training and model files.

mod adam;
mod config;
mod gradcheck;
mod io;
mod network;
mod scalar;
mod tensor;
mod train;

use std::path::Path;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::{default_layers, LayerSpec, ModelConfig, Shape};
pub use gradcheck::{gradcheck, random_instance, randomize, GradCheckConfig, GradCheckReport, LayerCheck};
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use network::{
    argmax, backward, cross_entropy, forward, glyph_batch, predict, predict_batch, softmax_cross_entropy,
    ForwardCache, LayerParams, ModelParams,
};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use train::{evaluate, train, train_with_monitor, EpochRecord, TrainConfig, TrainLog};

use crate::error::Result;
use crate::segmentation::GlyphImage;

/// A configuration together with its trained parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self> {
        params.check(&config)?;
        Ok(Self { config, params })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (config, params) = load_model(path)?;
        Ok(Self { config, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_model(path, &self.config, &self.params)
    }

    pub fn predict(&self, glyph: &GlyphImage) -> Result<(usize, f32)> {
        predict(&self.config, &self.params, glyph)
    }

    pub fn predict_batch(&self, glyphs: &[GlyphImage]) -> Result<Vec<(usize, f32)>> {
        predict_batch(&self.config, &self.params, glyphs)
    }
}
