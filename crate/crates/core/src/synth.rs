//! Procedural wedge-sign generator and page stamping.
//!
//! Produces a catalog of distinct, connected cuneiform-like signs built
//! from wedge impressions (triangular head plus tail), and synthetic pages
//! with signs stamped at known positions for segmentation and end-to-end
//! tests.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::io::write_pgm;
use crate::imaging::{connected_components, BBox, BinaryImage, Connectivity, GrayImage};
use crate::seed::mix;
use crate::segmentation::normalize_glyph;

/// One stylus impression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wedge {
    /// Center of the head's broad edge.
    pub x: f64,
    pub y: f64,
    /// Direction the wedge points, radians (0 = rightwards, y grows down).
    pub angle: f64,
    /// Head depth along `angle`; the broad edge is `0.9 * head` wide.
    pub head: f64,
    /// Total length including the head; `<= head` draws a bare head.
    pub length: f64,
    pub tail_width: f64,
}

impl Wedge {
    fn covers(&self, px: f64, py: f64) -> bool {
        let (dx, dy) = (self.angle.cos(), self.angle.sin());
        let (rx, ry) = (px - self.x, py - self.y);
        let along = rx * dx + ry * dy;
        let across = -rx * dy + ry * dx;
        if along < 0.0 {
            return false;
        }
        // Head: triangle narrowing from the broad edge to the tip.
        if along <= self.head {
            let half = 0.45 * self.head * (1.0 - along / self.head);
            if across.abs() <= half.max(self.tail_width / 2.0) {
                return true;
            }
        }
        along <= self.length && across.abs() <= self.tail_width / 2.0
    }
}

pub fn render_wedges(wedges: &[Wedge], width: usize, height: usize) -> BinaryImage {
    let mut img = BinaryImage::blank(width, height);
    for w in wedges {
        let reach = w.length.max(w.head) + w.head;
        let x0 = (w.x - reach).floor().max(0.0) as usize;
        let y0 = (w.y - reach).floor().max(0.0) as usize;
        let x1 = ((w.x + reach).ceil() as usize).min(width.saturating_sub(1));
        let y1 = ((w.y + reach).ceil() as usize).min(height.saturating_sub(1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                if w.covers(x as f64 + 0.5, y as f64 + 0.5) {
                    img.set(x, y, true);
                }
            }
        }
    }
    img
}

const CANVAS: usize = 96;

/// Draws one random connected sign of 2..=4 wedges. Every wedge after the
/// first starts on ink already drawn, so the result is one component.
fn random_sign(rng: &mut ChaCha8Rng) -> Vec<Wedge> {
    // Horizontal, vertical, two obliques and the short corner wedge.
    const ANGLES: [f64; 5] = [0.0, PI / 2.0, PI / 4.0, -PI / 4.0, 0.0];
    let count = rng.gen_range(2..=4);
    let mut wedges: Vec<Wedge> = Vec::with_capacity(count);
    for i in 0..count {
        let kind = rng.gen_range(0..ANGLES.len());
        let head = rng.gen_range(11.0..16.0);
        let length = if kind == 4 {
            head
        } else {
            rng.gen_range(22.0..44.0)
        };
        let (x, y) = if i == 0 {
            (rng.gen_range(24.0..40.0), rng.gen_range(24.0..40.0))
        } else {
            let prev = wedges[rng.gen_range(0..wedges.len())];
            let t = rng.gen_range(0.0..prev.length);
            (prev.x + prev.angle.cos() * t, prev.y + prev.angle.sin() * t)
        };
        wedges.push(Wedge {
            x,
            y,
            angle: ANGLES[kind],
            head,
            length,
            tail_width: 3.0,
        });
    }
    wedges
}

/// Distinct, connected synthetic signs, deterministic in `seed`.
///
/// A candidate is accepted only if it is a single 8-connected component
/// and its normalized 32-px rendering differs from every accepted sign in
/// at least 18% of pixels.
pub fn synthetic_signs(count: usize, seed: u64) -> Vec<BinaryImage> {
    let mut accepted: Vec<BinaryImage> = Vec::with_capacity(count);
    let mut probes: Vec<Vec<bool>> = Vec::with_capacity(count);
    let mut attempt = 0u64;
    while accepted.len() < count {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, attempt));
        attempt += 1;
        let img = crop_to_ink(&render_wedges(&random_sign(&mut rng), CANVAS, CANVAS), 2);
        if connected_components(&img, Connectivity::Eight).len() != 1 {
            continue;
        }
        let probe = normalize_glyph(&img, 32, 0.0).data().to_vec();
        let distinct = probes.iter().all(|p| {
            let diff = p.iter().zip(&probe).filter(|(a, b)| a != b).count();
            diff as f64 >= 0.18 * probe.len() as f64
        });
        if distinct {
            probes.push(probe);
            accepted.push(img);
        }
    }
    accepted
}

fn crop_to_ink(img: &BinaryImage, pad: usize) -> BinaryImage {
    let Some(b) = img.foreground_bbox() else {
        return img.clone();
    };
    let (w, h) = (b.width() + 2 * pad, b.height() + 2 * pad);
    let mut out = BinaryImage::blank(w, h);
    for y in b.y0..=b.y1 {
        for x in b.x0..=b.x1 {
            if img.get(x, y) {
                out.set(x - b.x0 + pad, y - b.y0 + pad, true);
            }
        }
    }
    out
}

/// Default sign names for generated catalogs: `s00`, `s01`, ...
pub fn sign_name(i: usize) -> String {
    format!("s{i:02}")
}

/// Writes master PGMs plus `catalog.tsv` (`sign_name<TAB>path`) into `dir`.
pub fn write_catalog(dir: &Path, names: &[String], signs: &[BinaryImage]) -> Result<()> {
    if names.len() != signs.len() {
        return Err(Error::Input("one name per sign required".into()));
    }
    let img_dir = dir.join("masters");
    fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut tsv = String::from("# sign_name\tpath\n");
    for (name, sign) in names.iter().zip(signs) {
        let rel = format!("masters/{name}.pgm");
        write_pgm(dir.join(&rel), &sign.to_gray())?;
        writeln!(tsv, "{name}\t{rel}").expect("string write");
    }
    let path = dir.join("catalog.tsv");
    fs::write(&path, tsv).map_err(|e| Error::io(&path, e))
}

/// Geometry for [`stamp_page`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampLayout {
    pub page_width: usize,
    /// Height every sign is scaled to (unless its width would exceed `max_glyph_width`).
    pub glyph_height: usize,
    pub max_glyph_width: usize,
    /// Blank pixels between neighbouring signs in a line.
    pub gap_x: usize,
    /// Blank pixels between lines.
    pub gap_y: usize,
    pub margin: usize,
}

impl Default for StampLayout {
    fn default() -> Self {
        Self {
            page_width: 1000,
            glyph_height: 60,
            max_glyph_width: 90,
            gap_x: 24,
            gap_y: 40,
            margin: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StampedPage {
    pub image: GrayImage,
    /// Ink bounding boxes per line, in reading order.
    pub boxes: Vec<Vec<BBox>>,
}

/// Stamps `lines` (rows of sign rasters) onto a white page, dark ink,
/// left-to-right and top-to-bottom, each sign vertically centered in its line.
pub fn stamp_page(lines: &[Vec<&BinaryImage>], layout: StampLayout) -> Result<StampedPage> {
    let mut placed: Vec<Vec<(BinaryImage, usize, usize)>> = Vec::new();
    let mut y = layout.margin;
    for line in lines {
        let scaled: Vec<BinaryImage> = line
            .iter()
            .map(|s| scale_sign(s, layout.glyph_height, layout.max_glyph_width))
            .collect();
        let line_h = scaled.iter().map(|s| s.height()).max().unwrap_or(0);
        let mut x = layout.margin;
        let mut row = Vec::new();
        for s in scaled {
            let top = y + (line_h - s.height()) / 2;
            let w = s.width();
            row.push((s, x, top));
            x += w + layout.gap_x;
        }
        if x - layout.gap_x + layout.margin > layout.page_width {
            return Err(Error::Input(format!(
                "line of {} signs does not fit a {} px page",
                line.len(),
                layout.page_width
            )));
        }
        placed.push(row);
        y += line_h + layout.gap_y;
    }
    let height = (y - layout.gap_y + layout.margin).max(layout.margin * 2 + 1);
    let mut page = GrayImage::filled(layout.page_width, height, 255)?;
    let mut boxes = Vec::new();
    for row in &placed {
        let mut row_boxes = Vec::new();
        for (s, x, y) in row {
            for sy in 0..s.height() {
                for sx in 0..s.width() {
                    if s.get(sx, sy) {
                        page.set(x + sx, y + sy, 0);
                    }
                }
            }
            let b = s.foreground_bbox().expect("stamped signs have ink");
            row_boxes.push(BBox::new(x + b.x0, y + b.y0, x + b.x1, y + b.y1));
        }
        boxes.push(row_boxes);
    }
    Ok(StampedPage { image: page, boxes })
}

/// Nearest-neighbor scale of the sign's ink box to the requested height,
/// shrinking further if the width limit would be exceeded.
fn scale_sign(sign: &BinaryImage, height: usize, max_width: usize) -> BinaryImage {
    let src = crop_to_ink(sign, 0);
    let mut scale = height as f64 / src.height() as f64;
    if src.width() as f64 * scale > max_width as f64 {
        scale = max_width as f64 / src.width() as f64;
    }
    let w = ((src.width() as f64 * scale).round() as usize).max(1);
    let h = ((src.height() as f64 * scale).round() as usize).max(1);
    let mut out = BinaryImage::blank(w, h);
    for y in 0..h {
        let sy = (((y as f64 + 0.5) / scale) as usize).min(src.height() - 1);
        for x in 0..w {
            let sx = (((x as f64 + 0.5) / scale) as usize).min(src.width() - 1);
            out.set(x, y, src.get(sx, sy));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signs_are_deterministic_connected_and_distinct() {
        let a = synthetic_signs(12, 5);
        let b = synthetic_signs(12, 5);
        assert_eq!(a, b);
        for s in &a {
            assert_eq!(connected_components(s, Connectivity::Eight).len(), 1);
        }
        let c = synthetic_signs(12, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn bare_head_wedge_is_a_triangle() {
        let w = Wedge {
            x: 2.0,
            y: 10.0,
            angle: 0.0,
            head: 12.0,
            length: 12.0,
            tail_width: 2.0,
        };
        let img = render_wedges(&[w], 20, 20);
        let col = |x: usize| (0..20).filter(|&y| img.get(x, y)).count();
        assert!(col(2) > col(8));
        assert!(col(8) > 0);
        assert_eq!(col(16), 0);
    }

    #[test]
    fn stamped_boxes_match_layout() {
        let signs = synthetic_signs(3, 1);
        let lines = vec![vec![&signs[0], &signs[1]], vec![&signs[2]]];
        let page = stamp_page(&lines, StampLayout::default()).unwrap();
        assert_eq!(page.image.width(), 1000);
        assert_eq!(page.boxes.len(), 2);
        assert_eq!(page.boxes[0].len(), 2);
        assert!(page.boxes[0][0].x1 < page.boxes[0][1].x0);
        assert!(page.boxes[0][0].y1 < page.boxes[1][0].y0);
        for b in page.boxes.iter().flatten() {
            assert!((b.x0..=b.x1).any(|x| page.image.get(x, b.y0) == 0));
            assert!((b.y0..=b.y1).any(|y| page.image.get(b.x1, y) == 0));
        }
    }

    #[test]
    fn overlong_line_is_rejected() {
        let signs = synthetic_signs(1, 1);
        let line: Vec<&BinaryImage> = std::iter::repeat(&signs[0]).take(40).collect();
        assert!(stamp_page(&[line], StampLayout::default()).is_err());
    }
}
