//! Page segmentation: binarized page → ordered, normalized glyph images.
//!
//! Components are found on a dilated copy of the page so that the separate
//! wedges of one sign merge into a single blob. Each blob's box is then
//! tightened to the un-dilated ink it contains, and glyphs are cropped from
//! the un-dilated raster so stroke weight matches the training data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::draw::{draw_box, GREEN};
use crate::imaging::io::{write_pgm, write_ppm};
use crate::imaging::{
    dilate, label_components, otsu_threshold, resize_to_width, BBox, BinaryImage, Component, Connectivity,
    ElementShape, GrayImage, Polarity, RgbImage, StructuringElement,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Working width every page is resized to before thresholding.
    pub target_width: usize,
    pub polarity: Polarity,
    pub dilation_shape: ElementShape,
    pub dilation_radius: usize,
    pub dilation_iterations: usize,
    pub connectivity: Connectivity,
    /// Components of the dilated page smaller than this are dropped as noise.
    pub min_component_pixels: usize,
    /// Two boxes share a line when their vertical overlap is at least this
    /// fraction of the shorter box's height.
    pub line_overlap_ratio: f64,
    pub glyph_size: usize,
    /// Crop padding per side, as a fraction of the box extent.
    pub glyph_margin: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            target_width: 1000,
            polarity: Polarity::InkIsDark,
            dilation_shape: ElementShape::Rectangle,
            dilation_radius: 1,
            dilation_iterations: 1,
            connectivity: Connectivity::Eight,
            min_component_pixels: 20,
            line_overlap_ratio: 0.5,
            glyph_size: 64,
            glyph_margin: 0.08,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if self.target_width == 0 {
            return Err(Error::Config("segmentation.target_width must be >= 1".into()));
        }
        if self.glyph_size < 8 {
            return Err(Error::Config("segmentation.glyph_size must be >= 8".into()));
        }
        if self.min_component_pixels < 1 {
            return Err(Error::Config(
                "segmentation.min_component_pixels must be >= 1".into(),
            ));
        }
        if !(self.line_overlap_ratio > 0.0 && self.line_overlap_ratio <= 1.0) {
            return Err(Error::Config(
                "segmentation.line_overlap_ratio must be in (0, 1]".into(),
            ));
        }
        if !(self.glyph_margin >= 0.0 && self.glyph_margin.is_finite()) {
            return Err(Error::Config("segmentation.glyph_margin must be >= 0".into()));
        }
        Ok(())
    }

    fn element(&self) -> StructuringElement {
        StructuringElement {
            radius_x: self.dilation_radius,
            radius_y: self.dilation_radius,
            shape: self.dilation_shape,
        }
    }
}

/// Square binary glyph in the classifier's input format.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlyphImage {
    side: usize,
    data: Vec<bool>,
}

impl GlyphImage {
    pub fn new(side: usize, data: Vec<bool>) -> Result<Self> {
        if side == 0 || data.len() != side * side {
            return Err(Error::Input(format!(
                "glyph of side {side} needs {} pixels, got {}",
                side * side,
                data.len()
            )));
        }
        Ok(Self { side, data })
    }

    pub fn blank(side: usize) -> Self {
        Self {
            side,
            data: vec![false; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.side + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.side + x] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn to_binary(&self) -> BinaryImage {
        BinaryImage::new(self.side, self.side, self.data.clone()).expect("square raster")
    }

    pub fn from_binary(img: &BinaryImage) -> Result<Self> {
        if img.width() != img.height() {
            return Err(Error::Input(format!(
                "glyph raster must be square, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        Self::new(img.width(), img.data().to_vec())
    }

    /// Ink 0, background 255.
    pub fn to_gray(&self) -> GrayImage {
        self.to_binary().to_gray()
    }

    /// Classifier input: ink 1.0, background 0.0.
    pub fn write_input(&self, out: &mut [f32]) {
        for (o, &b) in out.iter_mut().zip(&self.data) {
            *o = if b { 1.0 } else { 0.0 };
        }
    }

    pub fn to_input(&self) -> Vec<f32> {
        let mut v = vec![0.0; self.data.len()];
        self.write_input(&mut v);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharBox {
    pub bbox: BBox,
    pub line_index: usize,
    pub column_index: usize,
    /// Un-dilated ink pixels belonging to this character.
    pub pixel_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSegmentation {
    /// Size of the scan as supplied.
    pub source_size: (usize, usize),
    /// Size after resizing to `params_used.target_width`; boxes live here.
    pub page_size: (usize, usize),
    pub boxes: Vec<CharBox>,
    pub params_used: SegmentationParams,
}

/// Groups boxes into text lines.
///
/// Two boxes are linked when their vertical overlap covers at least
/// `ratio * min(height)`; lines are the transitive closure of that relation.
/// Lines are ordered by mean box center, members by `x0`.
pub fn group_into_lines(components: &[Component], ratio: f64) -> Vec<Vec<Component>> {
    let n = components.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if vertically_linked(&components[i].bbox, &components[j].bbox, ratio) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Component>)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(components[i]),
            None => groups.push((root, vec![components[i]])),
        }
    }
    let mut lines: Vec<Vec<Component>> = groups.into_iter().map(|(_, g)| g).collect();
    for line in &mut lines {
        line.sort_by_key(|c| (c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1, c.pixel_count));
    }
    let center_sum =
        |line: &Vec<Component>| -> usize { line.iter().map(|c| c.bbox.y0 + c.bbox.y1).sum::<usize>() };
    // Compare mean centers exactly: sum_a / n_a vs sum_b / n_b.
    lines.sort_by(|a, b| {
        (center_sum(a) * b.len())
            .cmp(&(center_sum(b) * a.len()))
            .then(a[0].bbox.x0.cmp(&b[0].bbox.x0))
            .then(a[0].bbox.y0.cmp(&b[0].bbox.y0))
    });
    lines
}

pub(crate) fn vertically_linked(a: &BBox, b: &BBox, ratio: f64) -> bool {
    let top = a.y0.max(b.y0);
    let bottom = a.y1.min(b.y1);
    if bottom < top {
        return false;
    }
    let overlap = (bottom - top + 1) as f64;
    overlap >= ratio * a.height().min(b.height()) as f64
}

/// Crops `bbox` (plus margin, clamped to the page) and scales it into a
/// square glyph with nearest-neighbor sampling, aspect preserved and
/// centered on a background canvas.
pub fn extract_glyph(page: &BinaryImage, bbox: BBox, params: &SegmentationParams) -> Result<GlyphImage> {
    if bbox.x0 > bbox.x1 || bbox.y0 > bbox.y1 || bbox.x1 >= page.width() || bbox.y1 >= page.height() {
        return Err(Error::Bounds(format!(
            "box ({}, {})-({}, {}) outside {}x{} page",
            bbox.x0,
            bbox.y0,
            bbox.x1,
            bbox.y1,
            page.width(),
            page.height()
        )));
    }
    let crop = expand_box(bbox, params.glyph_margin, page.width(), page.height());
    Ok(scale_into_square(page, crop, params.glyph_size))
}

/// Box grown by `margin` of its extent on every side, clamped to the page.
pub fn expand_box(b: BBox, margin: f64, width: usize, height: usize) -> BBox {
    let mx = (margin * b.width() as f64).round() as usize;
    let my = (margin * b.height() as f64).round() as usize;
    BBox::new(
        b.x0.saturating_sub(mx),
        b.y0.saturating_sub(my),
        (b.x1 + mx).min(width - 1),
        (b.y1 + my).min(height - 1),
    )
}

fn scale_into_square(src: &BinaryImage, crop: BBox, side: usize) -> GlyphImage {
    let (cw, ch) = (crop.width(), crop.height());
    let scale = side as f64 / cw.max(ch) as f64;
    let out_w = ((cw as f64 * scale).round() as usize).clamp(1, side);
    let out_h = ((ch as f64 * scale).round() as usize).clamp(1, side);
    let off_x = (side - out_w) / 2;
    let off_y = (side - out_h) / 2;
    let mut g = GlyphImage::blank(side);
    for v in 0..out_h {
        let sy = (((v as f64 + 0.5) * ch as f64 / out_h as f64) as usize).min(ch - 1);
        for u in 0..out_w {
            let sx = (((u as f64 + 0.5) * cw as f64 / out_w as f64) as usize).min(cw - 1);
            if src.get(crop.x0 + sx, crop.y0 + sy) {
                g.set(off_x + u, off_y + v, true);
            }
        }
    }
    g
}

/// Normalizes an arbitrary binary raster to glyph format: crop the ink's
/// bounding box, then apply the same margin/scale/center rule used for page
/// glyphs. An empty raster yields a blank glyph.
pub fn normalize_glyph(img: &BinaryImage, glyph_size: usize, margin: f64) -> GlyphImage {
    match img.foreground_bbox() {
        None => GlyphImage::blank(glyph_size),
        Some(b) => {
            // Margin is added as virtual background so the ink stays centered
            // wherever it sits in the input.
            let mx = (margin * b.width() as f64).round() as usize;
            let my = (margin * b.height() as f64).round() as usize;
            let (pw, ph) = (b.width() + 2 * mx, b.height() + 2 * my);
            let mut padded = BinaryImage::blank(pw, ph);
            for y in b.y0..=b.y1 {
                for x in b.x0..=b.x1 {
                    if img.get(x, y) {
                        padded.set(x - b.x0 + mx, y - b.y0 + my, true);
                    }
                }
            }
            scale_into_square(&padded, BBox::new(0, 0, pw - 1, ph - 1), glyph_size)
        }
    }
}

/// Full page pipeline: resize → Otsu → dilate → label → noise filter →
/// tighten to un-dilated ink → line grouping → glyph extraction.
pub fn segment_page(
    scan: &GrayImage,
    params: &SegmentationParams,
) -> Result<(PageSegmentation, Vec<GlyphImage>)> {
    params.validate()?;
    let page = resize_to_width(scan, params.target_width)?;
    let binary = otsu_threshold(&page, params.polarity).image;
    let (boxes, glyphs) = segment_binary(&binary, params)?;
    Ok((
        PageSegmentation {
            source_size: (scan.width(), scan.height()),
            page_size: (page.width(), page.height()),
            boxes,
            params_used: params.clone(),
        },
        glyphs,
    ))
}

/// Segmentation of an already binarized working page.
pub fn segment_binary(
    binary: &BinaryImage,
    params: &SegmentationParams,
) -> Result<(Vec<CharBox>, Vec<GlyphImage>)> {
    let dilated = dilate(binary, params.element(), params.dilation_iterations);
    let labeling = label_components(&dilated, params.connectivity);

    // Tight boxes of the original ink under each dilated blob.
    let mut tight: Vec<Option<Component>> = vec![None; labeling.components.len()];
    for (i, &ink) in binary.data().iter().enumerate() {
        if !ink {
            continue;
        }
        let label = labeling.labels[i] as usize;
        let (x, y) = (i % binary.width(), i / binary.width());
        let slot = &mut tight[label - 1];
        *slot = Some(match *slot {
            None => Component {
                pixel_count: 1,
                bbox: BBox::new(x, y, x, y),
            },
            Some(c) => Component {
                pixel_count: c.pixel_count + 1,
                bbox: c.bbox.including(x, y),
            },
        });
    }
    let kept: Vec<Component> = labeling
        .components
        .iter()
        .zip(tight)
        .filter(|(c, _)| c.pixel_count >= params.min_component_pixels)
        .filter_map(|(_, t)| t)
        .collect();

    let lines = group_into_lines(&kept, params.line_overlap_ratio);
    let mut boxes = Vec::with_capacity(kept.len());
    for (li, line) in lines.iter().enumerate() {
        for (ci, c) in line.iter().enumerate() {
            boxes.push(CharBox {
                bbox: c.bbox,
                line_index: li,
                column_index: ci,
                pixel_count: c.pixel_count,
            });
        }
    }
    let glyphs = boxes
        .iter()
        .map(|b| extract_glyph(binary, b.bbox, params))
        .collect::<Result<Vec<_>>>()?;
    Ok((boxes, glyphs))
}

/// File name used for a glyph in segmentation output directories.
pub fn glyph_file_name(b: &CharBox) -> String {
    format!("glyph_l{:03}_c{:03}.pgm", b.line_index, b.column_index)
}

/// Writes `manifest.tsv`, one PGM per glyph under `glyphs/`, and optionally
/// a debug overlay (`overlay.ppm`) of the working page with boxes drawn.
pub fn write_segmentation(
    dir: &Path,
    seg: &PageSegmentation,
    glyphs: &[GlyphImage],
    working_page: Option<&GrayImage>,
) -> Result<()> {
    let glyph_dir = dir.join("glyphs");
    fs::create_dir_all(&glyph_dir).map_err(|e| Error::io(&glyph_dir, e))?;
    let mut manifest = String::from("line_index\tcolumn_index\tx0\ty0\tx1\ty1\tpixel_count\tpath\n");
    for (b, g) in seg.boxes.iter().zip(glyphs) {
        let name = glyph_file_name(b);
        write_pgm(glyph_dir.join(&name), &g.to_gray())?;
        writeln!(
            manifest,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\tglyphs/{}",
            b.line_index, b.column_index, b.bbox.x0, b.bbox.y0, b.bbox.x1, b.bbox.y1, b.pixel_count, name
        )
        .expect("string write");
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    if let Some(page) = working_page {
        let mut overlay = RgbImage::from_gray(page);
        for b in &seg.boxes {
            draw_box(&mut overlay, b.bbox, GREEN);
        }
        write_ppm(dir.join("overlay.ppm"), &overlay)?;
    }
    Ok(())
}
