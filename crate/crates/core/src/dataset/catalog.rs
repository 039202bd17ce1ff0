use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::io::read_gray;
use crate::imaging::{otsu_threshold, Polarity};
use crate::segmentation::{normalize_glyph, GlyphImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphClass {
    pub class_id: usize,
    pub sign_name: String,
    pub source_path: PathBuf,
}

/// Reads a class catalog: one `sign_name<TAB>image_path` record per line,
/// `#` comments and blank lines ignored, relative paths resolved against
/// the manifest's directory. Class ids follow manifest order.
///
/// Every image is opened and binarized here so that a bad record fails the
/// load rather than a later build step.
pub fn load_class_catalog(manifest: &Path) -> Result<Vec<GlyphClass>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut classes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(name), Some(path), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Catalog(format!(
                "{}:{}: expected `sign_name<TAB>path`",
                manifest.display(),
                lineno + 1
            )));
        };
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Catalog(format!(
                "{}:{}: empty sign name",
                manifest.display(),
                lineno + 1
            )));
        }
        if !seen.insert(name.to_string()) {
            return Err(Error::Catalog(format!(
                "{}:{}: duplicate sign name `{name}`",
                manifest.display(),
                lineno + 1
            )));
        }
        let source_path = base.join(path.trim());
        let img = read_gray(&source_path).map_err(|e| {
            Error::Catalog(format!(
                "{}:{}: sign `{name}`: cannot load {}: {e}",
                manifest.display(),
                lineno + 1,
                source_path.display()
            ))
        })?;
        if otsu_threshold(&img, Polarity::InkIsDark).foreground == 0 {
            return Err(Error::Catalog(format!(
                "{}:{}: sign `{name}`: {} has no ink after thresholding",
                manifest.display(),
                lineno + 1,
                source_path.display()
            )));
        }
        classes.push(GlyphClass {
            class_id: classes.len(),
            sign_name: name.to_string(),
            source_path,
        });
    }
    if classes.is_empty() {
        return Err(Error::Catalog(format!(
            "{}: catalog lists no classes",
            manifest.display()
        )));
    }
    Ok(classes)
}

/// Loads each class's master image and normalizes it to glyph format.
pub fn load_masters(
    classes: &[GlyphClass],
    glyph_size: usize,
    margin: f64,
    polarity: Polarity,
) -> Result<Vec<GlyphImage>> {
    classes
        .iter()
        .map(|c| {
            let img = read_gray(&c.source_path)?;
            let bin = otsu_threshold(&img, polarity).image;
            Ok(normalize_glyph(&bin, glyph_size, margin))
        })
        .collect()
}
