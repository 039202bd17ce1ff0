//! Cuneiform sign recognition: page segmentation, glyph dataset
//! construction, a from-scratch convolutional classifier, evaluation
//! metrics, and lexicon-based translation of recognized sign sequences.

pub mod config;
pub mod dataset;
pub mod error;
pub mod imaging;
pub mod lexicon;
pub mod metrics;
pub mod nn;
pub mod seed;
pub mod segmentation;
pub mod synth;
pub mod workflow;

pub use error::{Error, Result};
