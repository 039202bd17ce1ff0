//! Base-variant recipes and seeded augmentation. Every transform maps a
//! binary square glyph to a binary glyph of the same side.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::error::{Error, Result};
use crate::imaging::{dilate, erode, StructuringElement};
use crate::seed::{mix, mix_all};
use crate::segmentation::GlyphImage;

/// Inverse-mapped nearest-neighbor affine warp about the glyph center:
/// rotate by `angle_deg`, scale by (`sx`, `sy`), then translate by
/// (`tx`, `ty`) pixels. Source pixels outside the glyph read as background.
pub fn warp(g: &GlyphImage, angle_deg: f64, sx: f64, sy: f64, tx: f64, ty: f64) -> GlyphImage {
    let side = g.side();
    let c = (side as f64 - 1.0) / 2.0;
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let mut out = GlyphImage::blank(side);
    for y in 0..side {
        for x in 0..side {
            let qx = x as f64 - c - tx;
            let qy = y as f64 - c - ty;
            // Inverse rotation, then inverse scale.
            let rx = (cos * qx + sin * qy) / sx;
            let ry = (-sin * qx + cos * qy) / sy;
            let (src_x, src_y) = ((rx + c).round(), (ry + c).round());
            let inside = src_x >= 0.0 && src_y >= 0.0 && src_x < side as f64 && src_y < side as f64;
            if inside && g.get(src_x as usize, src_y as usize) {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Removes foreground pixels with no 8-neighbor ink.
pub fn remove_isolated(g: &GlyphImage) -> GlyphImage {
    let side = g.side();
    let mut out = g.clone();
    for y in 0..side {
        for x in 0..side {
            if !g.get(x, y) {
                continue;
            }
            let mut lonely = true;
            'scan: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx >= 0
                        && ny >= 0
                        && (nx as usize) < side
                        && (ny as usize) < side
                        && g.get(nx as usize, ny as usize)
                    {
                        lonely = false;
                        break 'scan;
                    }
                }
            }
            if lonely {
                out.set(x, y, false);
            }
        }
    }
    out
}

fn thicken(g: &GlyphImage) -> GlyphImage {
    let d = dilate(&g.to_binary(), StructuringElement::cross(1, 1), 1);
    GlyphImage::new(g.side(), d.data().to_vec()).expect("same side")
}

/// One-pixel cross erosion; strokes too thin to survive keep the input.
fn thin(g: &GlyphImage) -> GlyphImage {
    let e = erode(&g.to_binary(), StructuringElement::cross(1, 1));
    let out = GlyphImage::new(g.side(), e.data().to_vec()).expect("same side");
    if out.foreground_count() * 4 < g.foreground_count() {
        g.clone()
    } else {
        out
    }
}

fn salt_then_clean(g: &GlyphImage, prob: f64, rng: &mut ChaCha8Rng) -> GlyphImage {
    let mut noisy = g.clone();
    for y in 0..g.side() {
        for x in 0..g.side() {
            if !g.get(x, y) && rng.gen_bool(prob) {
                noisy.set(x, y, true);
            }
        }
    }
    remove_isolated(&noisy)
}

/// The fixed base-variant recipes, indexed by `variant_id % 10`.
const RECIPES: [&str; 10] = [
    "normalized master",
    "thicken",
    "thin",
    "shrink 0.92",
    "grow 1.08",
    "thicken + shrink 0.92",
    "thin + grow 1.08",
    "salt 2% + clean",
    "thicken + salt 2% + clean",
    "squeeze x0.94 y1.04",
];

pub fn recipe_name(variant_id: usize) -> &'static str {
    RECIPES[variant_id % RECIPES.len()]
}

/// `count` base representations of `master`. Variant 0 is the master with
/// isolated pixels removed; variants 1..9 follow [`recipe_name`]. Past ten,
/// recipes repeat with a seeded extra scale jitter of up to ±3%.
pub fn generate_base_variants(master: &GlyphImage, count: usize, seed: u64) -> Vec<GlyphImage> {
    let clean = remove_isolated(master);
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, i as u64));
            let scaled = |g: &GlyphImage, s: f64| warp(g, 0.0, s, s, 0.0, 0.0);
            let mut v = match i % 10 {
                0 => clean.clone(),
                1 => thicken(&clean),
                2 => thin(&clean),
                3 => scaled(&clean, 0.92),
                4 => scaled(&clean, 1.08),
                5 => scaled(&thicken(&clean), 0.92),
                6 => scaled(&thin(&clean), 1.08),
                7 => salt_then_clean(&clean, 0.02, &mut rng),
                8 => salt_then_clean(&thicken(&clean), 0.02, &mut rng),
                _ => warp(&clean, 0.0, 0.94, 1.04, 0.0, 0.0),
            };
            if i >= 10 {
                let s = rng.gen_range(0.97..1.03);
                v = scaled(&v, s);
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    /// Maximum absolute rotation, degrees.
    pub rotation_max: f64,
    /// Maximum absolute shift per axis, as a fraction of the glyph side.
    pub translate_max: f64,
    pub scale_range: (f64, f64),
    pub noise_flip_prob: f64,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            rotation_max: 10.0,
            translate_max: 0.05,
            scale_range: (0.9, 1.1),
            noise_flip_prob: 0.01,
            seed: 0x5EED_0002,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..180.0).contains(&self.rotation_max) {
            return Err(Error::Config(
                "augmentation.rotation_max must be in [0, 180)".into(),
            ));
        }
        if !(self.translate_max >= 0.0 && self.translate_max.is_finite()) {
            return Err(Error::Config("augmentation.translate_max must be >= 0".into()));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(
                "augmentation.scale_range must satisfy 0 < min <= max".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.noise_flip_prob) {
            return Err(Error::Config(
                "augmentation.noise_flip_prob must be in [0, 0.5)".into(),
            ));
        }
        Ok(())
    }
}

/// `n` augmented copies of `base` with `augment_id` 1..=n. Each copy draws
/// from its own stream keyed by (seed, class, variant, augment id).
pub fn augment(base: &Sample, n: usize, config: &AugmentationConfig) -> Vec<Sample> {
    let side = base.image.side() as f64;
    (1..=n)
        .map(|k| {
            let stream = mix_all(
                config.seed,
                &[base.class_id as u64, base.variant_id as u64, k as u64],
            );
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let angle = symmetric(&mut rng, config.rotation_max);
            let tx = symmetric(&mut rng, config.translate_max) * side;
            let ty = symmetric(&mut rng, config.translate_max) * side;
            let (lo, hi) = config.scale_range;
            let scale = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            let mut img = warp(&base.image, angle, scale, scale, tx, ty);
            if config.noise_flip_prob > 0.0 {
                for y in 0..img.side() {
                    for x in 0..img.side() {
                        if rng.gen_bool(config.noise_flip_prob) {
                            let v = img.get(x, y);
                            img.set(x, y, !v);
                        }
                    }
                }
            }
            Sample {
                image: img,
                class_id: base.class_id,
                variant_id: base.variant_id,
                augment_id: k,
            }
        })
        .collect()
}

fn symmetric(rng: &mut ChaCha8Rng, max: f64) -> f64 {
    if max > 0.0 {
        rng.gen_range(-max..=max)
    } else {
        0.0
    }
}
