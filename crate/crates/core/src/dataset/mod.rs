//! Labeled glyph dataset: catalog loading, base variants, augmentation,
//! stratified splitting and on-disk containers.

mod catalog;
mod split;
mod store;
mod transform;

use serde::{Deserialize, Serialize};

pub use catalog::{load_class_catalog, load_masters, GlyphClass};
pub use split::{allocate, hamilton, split_dataset, DatasetSplit, SplitSpec};
pub use store::{
    decode_packed, encode_packed, load_dir, load_packed, save_dir, save_packed, Dataset, PACKED_MAGIC,
    PACKED_VERSION,
};
pub use transform::{
    augment, generate_base_variants, recipe_name, remove_isolated, warp, AugmentationConfig,
};

use crate::error::{Error, Result};
use crate::seed::mix;
use crate::segmentation::GlyphImage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub image: GlyphImage,
    pub class_id: usize,
    /// Base representation index.
    pub variant_id: usize,
    /// 0 for the unaugmented base, 1..=n for augmented copies.
    pub augment_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub variants_per_class: usize,
    pub augmentations_per_variant: usize,
    pub variant_seed: u64,
    pub augmentation: AugmentationConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            variants_per_class: 10,
            augmentations_per_variant: 5,
            variant_seed: 0x5EED_0001,
            augmentation: AugmentationConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variants_per_class == 0 {
            return Err(Error::Config("dataset.variants_per_class must be >= 1".into()));
        }
        if self.variants_per_class > u16::MAX as usize || self.augmentations_per_variant >= u16::MAX as usize
        {
            return Err(Error::Config(
                "dataset variant/augment counts exceed 65535".into(),
            ));
        }
        self.augmentation.validate()
    }

    pub fn samples_per_class(&self) -> usize {
        self.variants_per_class * (1 + self.augmentations_per_variant)
    }
}

/// Expands normalized masters (indexed by class id) into the full sample
/// list, ordered by class, variant, augment id. Class `c` draws its variants
/// from `mix(variant_seed, c)`.
pub fn build_samples(masters: &[GlyphImage], config: &DatasetConfig) -> Result<Vec<Sample>> {
    config.validate()?;
    let mut out = Vec::with_capacity(masters.len() * config.samples_per_class());
    for (class_id, master) in masters.iter().enumerate() {
        let variants = generate_base_variants(
            master,
            config.variants_per_class,
            mix(config.variant_seed, class_id as u64),
        );
        for (variant_id, image) in variants.into_iter().enumerate() {
            let base = Sample {
                image,
                class_id,
                variant_id,
                augment_id: 0,
            };
            let augmented = augment(&base, config.augmentations_per_variant, &config.augmentation);
            out.push(base);
            out.extend(augmented);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn masters(n: usize, side: usize) -> Vec<GlyphImage> {
        (0..n)
            .map(|c| {
                let mut g = GlyphImage::blank(side);
                for i in 3..side - 3 {
                    g.set(i, 3 + c % (side - 6), true);
                    g.set(3 + (c * 5) % (side - 6), i, true);
                }
                g
            })
            .collect()
    }

    #[test]
    fn sixty_per_class_with_unique_keys() {
        let cfg = DatasetConfig::default();
        let samples = build_samples(&masters(3, 24), &cfg).unwrap();
        assert_eq!(samples.len(), 3 * 60);
        let keys: HashSet<_> = samples
            .iter()
            .map(|s| (s.class_id, s.variant_id, s.augment_id))
            .collect();
        assert_eq!(keys.len(), samples.len());
        assert!(samples.iter().all(|s| s.variant_id < 10 && s.augment_id <= 5));
        assert!(samples.iter().all(|s| s.image.side() == 24));
        assert_eq!(build_samples(&masters(3, 24), &cfg).unwrap(), samples);
    }

    #[test]
    fn full_corpus_arithmetic() {
        let cfg = DatasetConfig::default();
        assert_eq!(235 * 10, 2350);
        assert_eq!(
            235 * cfg.variants_per_class * cfg.augmentations_per_variant,
            11_750
        );
        assert_eq!(235 * cfg.samples_per_class(), 14_100);
    }

    #[test]
    fn zero_variants_is_a_config_error() {
        let cfg = DatasetConfig {
            variants_per_class: 0,
            ..Default::default()
        };
        assert!(matches!(
            build_samples(&masters(1, 16), &cfg),
            Err(Error::Config(_))
        ));
    }
}
