//! Pixel-level primitives shared by dataset preprocessing and page
//! segmentation: grayscale conversion, aspect-preserving resize, Otsu
//! binarization, dilation and connected-component labeling.
//!
//! All functions are pure; images are immutable values.

pub mod draw;
pub mod io;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Input(format!(
                "expected {} gray bytes for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Row-major binary raster; `true` is foreground (ink).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Input(format!(
                "expected {} binary pixels for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Render as gray: ink 0, background 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width.max(1),
            height: self.height.max(1),
            data: if self.data.is_empty() {
                vec![255]
            } else {
                self.data.iter().map(|&b| if b { 0 } else { 255 }).collect()
            },
        }
    }

    /// Tight bounding box of the foreground, if any.
    pub fn foreground_bbox(&self) -> Option<BBox> {
        let mut bbox: Option<BBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bbox = Some(match bbox {
                        None => BBox::new(x, y, x, y),
                        Some(b) => b.including(x, y),
                    });
                }
            }
        }
        bbox
    }
}

/// Interleaved 8-bit RGB raster, used for annotated overlays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != 3 * width * height {
            return Err(Error::Input(format!(
                "expected {} rgb bytes for {width}x{height}, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Writes a pixel when (x, y) is inside the raster; silently clips otherwise.
    pub fn put_clipped(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.put(x as usize, y as usize, rgb);
        }
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn including(self, x: usize, y: usize) -> Self {
        Self {
            x0: self.x0.min(x),
            y0: self.y0.min(y),
            x1: self.x1.max(x),
            y1: self.y1.max(y),
        }
    }

    pub fn union(self, other: BBox) -> Self {
        Self {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementShape {
    Rectangle,
    Cross,
}

/// Dilation footprint centered on the origin. A rectangle covers
/// `[-rx, rx] x [-ry, ry]`; a cross covers only the two axes of that box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    pub radius_x: usize,
    pub radius_y: usize,
    pub shape: ElementShape,
}

impl StructuringElement {
    pub fn rectangle(radius_x: usize, radius_y: usize) -> Self {
        Self {
            radius_x,
            radius_y,
            shape: ElementShape::Rectangle,
        }
    }

    pub fn cross(radius_x: usize, radius_y: usize) -> Self {
        Self {
            radius_x,
            radius_y,
            shape: ElementShape::Cross,
        }
    }

    /// Offsets (dx, dy) in the footprint; always contains (0, 0).
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let (rx, ry) = (self.radius_x as isize, self.radius_y as isize);
        let mut out = Vec::new();
        for dy in -ry..=ry {
            for dx in -rx..=rx {
                if self.shape == ElementShape::Rectangle || dx == 0 || dy == 0 {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    InkIsDark,
    InkIsLight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Four,
    Eight,
}

/// Converts interleaved RGB to gray with luma weights 0.299/0.587/0.114.
pub fn to_grayscale(width: usize, height: usize, rgb: &[u8]) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::Input(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    if rgb.len() != 3 * width * height {
        return Err(Error::Input(format!(
            "rgb raster {width}x{height} needs {} bytes, got {}",
            3 * width * height,
            rgb.len()
        )));
    }
    let data = rgb
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, data)
}

/// Bilinear resize to `target_width`, height scaled to keep the aspect ratio.
///
/// Sample positions use the align-corners mapping, so corner pixels of the
/// output equal the source corners and `target_width == width` is an exact copy.
pub fn resize_to_width(img: &GrayImage, target_width: usize) -> Result<GrayImage> {
    if target_width == 0 {
        return Err(Error::Input("target width must be at least 1".into()));
    }
    if target_width == img.width {
        return Ok(img.clone());
    }
    let out_h = ((img.height as f64 * target_width as f64 / img.width as f64).round() as usize).max(1);
    Ok(resize(img, target_width, out_h))
}

/// Bilinear resize to an explicit size (align-corners sampling).
pub fn resize(img: &GrayImage, out_w: usize, out_h: usize) -> GrayImage {
    let map = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_out <= 1 || n_in <= 1 {
            return (0, 0, 0.0);
        }
        let s = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let lo = (s.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, s - lo as f64)
    };
    let xs: Vec<_> = (0..out_w).map(|x| map(x, out_w, img.width)).collect();
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = map(y, out_h, img.height);
        for &(x0, x1, fx) in &xs {
            let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
            let bot = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
            let v = top * (1.0 - fy) + bot * fy;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage {
        width: out_w,
        height: out_h,
        data,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thresholded {
    pub image: BinaryImage,
    pub threshold: u8,
    pub foreground: usize,
    pub background: usize,
}

/// Otsu binarization.
///
/// Candidate `t` splits the histogram into `<= t` and `> t`. The chosen `t`
/// maximizes between-class variance; ties go to the smallest `t`, so a
/// constant image yields `t = 0`. Foreground is `<= t` for dark ink and
/// `> t` for light ink.
pub fn otsu_threshold(img: &GrayImage, polarity: Polarity) -> Thresholded {
    let mut hist = [0u64; 256];
    for &v in &img.data {
        hist[v as usize] += 1;
    }
    let threshold = otsu_from_histogram(&hist);
    let image = BinaryImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|&v| match polarity {
                Polarity::InkIsDark => v <= threshold,
                Polarity::InkIsLight => v > threshold,
            })
            .collect(),
    };
    let foreground = image.foreground_count();
    Thresholded {
        background: img.data.len() - foreground,
        image,
        threshold,
        foreground,
    }
}

/// Threshold index maximizing between-class variance of `hist`.
///
/// With class weights `w0, w1` and sums `s0, s1`, the variance is
/// proportional to `(n*s0 - w0*s)^2 / (w0*w1)`; candidates are compared as
/// exact rationals with 256-bit cross products.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> u8 {
    let n: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(i, &h)| i as u64 * h).sum();
    // (n*s)^2 must fit in u128: n <= 2^24 is always safe.
    let exact = n <= (1 << 24);

    let mut best_t = 0u8;
    let mut best_num = 0u128;
    let mut best_den = 1u128;
    let mut best_f = 0f64;
    let (mut w0, mut s0) = (0u64, 0u64);
    for t in 0..256usize {
        w0 += hist[t];
        s0 += t as u64 * hist[t];
        let w1 = n - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let diff = (n as i128 * s0 as i128 - w0 as i128 * total_sum as i128).unsigned_abs();
        if exact {
            let num = diff * diff;
            let den = w0 as u128 * w1 as u128;
            if wide_mul(num, best_den) > wide_mul(best_num, den) {
                best_t = t as u8;
                best_num = num;
                best_den = den;
            }
        } else {
            let v = (diff as f64) * (diff as f64) / (w0 as f64 * w1 as f64);
            if v > best_f {
                best_t = t as u8;
                best_f = v;
            }
        }
    }
    best_t
}

/// Full 256-bit product of two u128 values as (high, low).
fn wide_mul(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = u64::MAX as u128;
    let (a_hi, a_lo) = (a >> 64, a & MASK);
    let (b_hi, b_lo) = (b >> 64, b & MASK);
    let ll = a_lo * b_lo;
    let lh = a_lo * b_hi;
    let hl = a_hi * b_lo;
    let hh = a_hi * b_hi;
    let mid = (ll >> 64) + (lh & MASK) + (hl & MASK);
    let lo = (ll & MASK) | (mid << 64);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (hi, lo)
}

/// Morphological dilation applied `iterations` times.
pub fn dilate(bin: &BinaryImage, se: StructuringElement, iterations: usize) -> BinaryImage {
    let mut cur = bin.clone();
    for _ in 0..iterations {
        cur = match se.shape {
            ElementShape::Rectangle => {
                let h = dilate_rows(&cur, se.radius_x);
                dilate_cols(&h, se.radius_y)
            }
            ElementShape::Cross => {
                let h = dilate_rows(&cur, se.radius_x);
                let v = dilate_cols(&cur, se.radius_y);
                BinaryImage {
                    width: cur.width,
                    height: cur.height,
                    data: h.data.iter().zip(&v.data).map(|(&a, &b)| a || b).collect(),
                }
            }
        };
    }
    cur
}

fn dilate_rows(bin: &BinaryImage, r: usize) -> BinaryImage {
    if r == 0 {
        return bin.clone();
    }
    let (w, h) = (bin.width, bin.height);
    let mut out = BinaryImage::blank(w, h);
    for y in 0..h {
        let row = &bin.data[y * w..(y + 1) * w];
        let dst = &mut out.data[y * w..(y + 1) * w];
        for (x, _) in row.iter().enumerate().filter(|(_, &b)| b) {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            dst[lo..=hi].iter_mut().for_each(|p| *p = true);
        }
    }
    out
}

fn dilate_cols(bin: &BinaryImage, r: usize) -> BinaryImage {
    if r == 0 {
        return bin.clone();
    }
    let (w, h) = (bin.width, bin.height);
    let mut out = BinaryImage::blank(w, h);
    for y in 0..h {
        for x in 0..w {
            if bin.data[y * w + x] {
                let lo = y.saturating_sub(r);
                let hi = (y + r).min(h - 1);
                for yy in lo..=hi {
                    out.data[yy * w + x] = true;
                }
            }
        }
    }
    out
}

/// Morphological erosion with the same footprint semantics as [`dilate`];
/// pixels outside the raster count as background.
pub(crate) fn erode(bin: &BinaryImage, se: StructuringElement) -> BinaryImage {
    let offsets = se.offsets();
    let (w, h) = (bin.width as isize, bin.height as isize);
    let mut out = BinaryImage::blank(bin.width, bin.height);
    for y in 0..h {
        for x in 0..w {
            let keep = offsets.iter().all(|&(dx, dy)| {
                let (xx, yy) = (x + dx, y + dy);
                xx >= 0 && yy >= 0 && xx < w && yy < h && bin.data[(yy * w + xx) as usize]
            });
            out.data[(y * w + x) as usize] = keep;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub pixel_count: usize,
    pub bbox: BBox,
}

/// Per-pixel component labels alongside the component list. Label 0 is
/// background; label `i + 1` refers to `components[i]`.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

pub fn connected_components(bin: &BinaryImage, connectivity: Connectivity) -> Vec<Component> {
    label_components(bin, connectivity).components
}

/// Breadth-first component labeling. Components are sorted by
/// (y0, x0, pixel_count) and labels renumbered to match that order.
pub fn label_components(bin: &BinaryImage, connectivity: Connectivity) -> Labeling {
    let (w, h) = (bin.width, bin.height);
    let mut labels = vec![0u32; w * h];
    let mut raw: Vec<Component> = Vec::new();
    let neighbors: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ],
    };
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !bin.data[start] || labels[start] != 0 {
            continue;
        }
        let label = raw.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let (sx, sy) = (start % w, start / w);
        let mut comp = Component {
            pixel_count: 0,
            bbox: BBox::new(sx, sy, sx, sy),
        };
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            comp.pixel_count += 1;
            comp.bbox = comp.bbox.including(x, y);
            for &(dx, dy) in neighbors {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if bin.data[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        raw.push(comp);
    }

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by_key(|&i| (raw[i].bbox.y0, raw[i].bbox.x0, raw[i].pixel_count, i));
    let mut remap = vec![0u32; raw.len() + 1];
    for (new, &old) in order.iter().enumerate() {
        remap[old + 1] = new as u32 + 1;
    }
    for l in labels.iter_mut() {
        *l = remap[*l as usize];
    }
    Labeling {
        labels,
        components: order.into_iter().map(|i| raw[i]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bin_from(w: usize, h: usize, on: &[(usize, usize)]) -> BinaryImage {
        let mut b = BinaryImage::blank(w, h);
        for &(x, y) in on {
            b.set(x, y, true);
        }
        b
    }

    #[test]
    fn grayscale_fixed_points() {
        let white = to_grayscale(2, 2, &[255; 12]).unwrap();
        assert!(white.data().iter().all(|&v| v == 255));
        let red = to_grayscale(1, 3, &[255, 0, 0, 255, 0, 0, 255, 0, 0]).unwrap();
        assert!(red.data().iter().all(|&v| v == 76));
        let bw = to_grayscale(2, 1, &[0, 0, 0, 255, 255, 255]).unwrap();
        assert_eq!(bw.data(), &[0, 255]);
    }

    #[test]
    fn grayscale_rejects_bad_length() {
        assert!(matches!(to_grayscale(2, 2, &[0; 11]), Err(Error::Input(_))));
        assert!(matches!(to_grayscale(0, 2, &[]), Err(Error::Input(_))));
    }

    #[test]
    fn resize_dimensions_and_identity() {
        let img = GrayImage::filled(3000, 1500, 7).unwrap();
        let out = resize_to_width(&img, 1000).unwrap();
        assert_eq!((out.width(), out.height()), (1000, 500));

        let data: Vec<u8> = (0..1000 * 400).map(|i| (i * 31 % 251) as u8).collect();
        let img = GrayImage::new(1000, 400, data).unwrap();
        assert_eq!(resize_to_width(&img, 1000).unwrap(), img);
    }

    #[test]
    fn resize_checkerboard_keeps_corners() {
        let img = GrayImage::new(2, 2, vec![0, 255, 255, 0]).unwrap();
        let out = resize_to_width(&img, 4).unwrap();
        assert_eq!((out.width(), out.height()), (4, 4));
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(3, 0), 255);
        assert_eq!(out.get(0, 3), 255);
        assert_eq!(out.get(3, 3), 0);
        // Hand evaluation at (1, 0): s = 1/3, so 255/3 = 85.
        assert_eq!(out.get(1, 0), 85);
    }

    #[test]
    fn otsu_bimodal() {
        let img = GrayImage::new(4, 1, vec![0, 0, 255, 255]).unwrap();
        let r = otsu_threshold(&img, Polarity::InkIsDark);
        assert_eq!(r.image.data(), &[true, true, false, false]);
        assert_eq!((r.foreground, r.background), (2, 2));
    }

    #[test]
    fn otsu_constant_images() {
        let img = GrayImage::filled(5, 5, 128).unwrap();
        let a = otsu_threshold(&img, Polarity::InkIsDark);
        let b = otsu_threshold(&img, Polarity::InkIsDark);
        assert_eq!(a.threshold, b.threshold);
        assert!(a.foreground == 0 || a.foreground == 25);

        let white = GrayImage::filled(5, 5, 255).unwrap();
        assert_eq!(otsu_threshold(&white, Polarity::InkIsDark).foreground, 0);
    }

    #[test]
    fn otsu_ramp_matches_scan() {
        let img = GrayImage::new(16, 16, (0..=255).collect()).unwrap();
        // Brute force over every candidate on the raw pixels.
        let px: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
        let mut best = (0usize, -1.0f64);
        for t in 0..256 {
            let (a, b): (Vec<f64>, Vec<f64>) = px.iter().partition(|&&v| v <= t as f64);
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let m0 = a.iter().sum::<f64>() / a.len() as f64;
            let m1 = b.iter().sum::<f64>() / b.len() as f64;
            let var = a.len() as f64 * b.len() as f64 * (m0 - m1).powi(2);
            if var > best.1 + 1e-9 {
                best = (t, var);
            }
        }
        assert_eq!(
            otsu_threshold(&img, Polarity::InkIsDark).threshold as usize,
            best.0
        );
        assert_eq!(best.0, 127);
    }

    #[test]
    fn wide_mul_matches_small_products() {
        assert_eq!(wide_mul(3, 5), (0, 15));
        assert_eq!(wide_mul(u128::MAX, 2), (1, u128::MAX - 1));
        assert_eq!(wide_mul(1 << 64, 1 << 64), (1, 0));
    }

    #[test]
    fn dilate_single_pixel_rectangle() {
        let b = bin_from(5, 5, &[(2, 2)]);
        let d = dilate(&b, StructuringElement::rectangle(1, 1), 1);
        for y in 0..5 {
            for x in 0..5 {
                let inside = (1..=3).contains(&x) && (1..=3).contains(&y);
                assert_eq!(d.get(x, y), inside, "({x},{y})");
            }
        }
    }

    #[test]
    fn dilate_zero_iterations_is_identity() {
        let b = bin_from(4, 3, &[(0, 0), (3, 2)]);
        assert_eq!(dilate(&b, StructuringElement::rectangle(2, 2), 0), b);
    }

    #[test]
    fn dilate_cross_keeps_blobs_apart() {
        // Three background pixels between the seeds.
        let b = bin_from(9, 5, &[(2, 2), (6, 2)]);
        let d = dilate(&b, StructuringElement::cross(1, 1), 1);
        let expected = bin_from(
            9,
            5,
            &[
                (2, 2),
                (1, 2),
                (3, 2),
                (2, 1),
                (2, 3),
                (6, 2),
                (5, 2),
                (7, 2),
                (6, 1),
                (6, 3),
            ],
        );
        assert_eq!(d, expected);
        let comps = connected_components(&d, Connectivity::Four);
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.pixel_count == 5));
    }

    #[test]
    fn erode_undoes_dilation_of_a_block() {
        let b = bin_from(7, 7, &[(3, 3)]);
        let d = dilate(&b, StructuringElement::rectangle(1, 1), 1);
        assert_eq!(erode(&d, StructuringElement::rectangle(1, 1)), b);
    }

    #[test]
    fn components_basic() {
        assert!(connected_components(&BinaryImage::blank(4, 4), Connectivity::Eight).is_empty());

        let b = bin_from(
            6,
            3,
            &[(0, 0), (1, 0), (0, 1), (1, 1), (4, 1), (5, 1), (4, 2), (5, 2)],
        );
        let c = connected_components(&b, Connectivity::Eight);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].bbox, BBox::new(0, 0, 1, 1));
        assert_eq!(c[1].bbox, BBox::new(4, 1, 5, 2));
        assert!(c.iter().all(|c| c.pixel_count == 4));

        let diag = bin_from(2, 2, &[(0, 0), (1, 1)]);
        assert_eq!(connected_components(&diag, Connectivity::Four).len(), 2);
        assert_eq!(connected_components(&diag, Connectivity::Eight).len(), 1);
    }

    fn arb_bitmap() -> impl Strategy<Value = BinaryImage> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.3), w * h)
                .prop_map(move |d| BinaryImage::new(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn gray_inputs_are_fixed_points(v in 0u8..=255, w in 1usize..5, h in 1usize..5) {
            let g = to_grayscale(w, h, &vec![v; 3 * w * h]).unwrap();
            prop_assert!(g.data().iter().all(|&p| p == v));
        }

        #[test]
        fn resize_preserves_aspect(w in 1usize..60, h in 1usize..60, tw in 1usize..80) {
            let img = GrayImage::filled(w, h, 100).unwrap();
            let out = resize_to_width(&img, tw).unwrap();
            prop_assert_eq!(out.width(), tw);
            let err = (out.height() as f64 / tw as f64 - h as f64 / w as f64).abs();
            // max(1, ..) clamps tiny heights, which can exceed the bound.
            prop_assert!(err <= 1.0 / tw as f64 + 1e-12 || out.height() == 1);
        }

        #[test]
        fn dilation_extensive_and_monotone(a in arb_bitmap(), rx in 0usize..3, ry in 0usize..3,
                                            cross in any::<bool>(), extra in proptest::collection::vec(any::<bool>(), 144)) {
            let se = if cross { StructuringElement::cross(rx, ry) } else { StructuringElement::rectangle(rx, ry) };
            let da = dilate(&a, se, 1);
            prop_assert!(a.is_subset_of(&da));
            let b_data: Vec<bool> = a.data().iter().zip(extra.iter()).map(|(&p, &e)| p || e).collect();
            let b = BinaryImage::new(a.width(), a.height(), b_data).unwrap();
            prop_assert!(da.is_subset_of(&dilate(&b, se, 1)));
            // Matches the footprint definition directly.
            let offs = se.offsets();
            for y in 0..a.height() {
                for x in 0..a.width() {
                    let hit = offs.iter().any(|&(dx, dy)| {
                        let (sx, sy) = (x as isize - dx, y as isize - dy);
                        sx >= 0 && sy >= 0 && (sx as usize) < a.width() && (sy as usize) < a.height()
                            && a.get(sx as usize, sy as usize)
                    });
                    prop_assert_eq!(da.get(x, y), hit);
                }
            }
        }

        #[test]
        fn components_partition_foreground(b in arb_bitmap(), eight in any::<bool>()) {
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            let lab = label_components(&b, conn);
            let total: usize = lab.components.iter().map(|c| c.pixel_count).sum();
            prop_assert_eq!(total, b.foreground_count());
            for (i, &l) in lab.labels.iter().enumerate() {
                prop_assert_eq!(l != 0, b.data()[i]);
                if l != 0 {
                    let c = lab.components[l as usize - 1];
                    let (x, y) = (i % b.width(), i / b.width());
                    prop_assert!(x >= c.bbox.x0 && x <= c.bbox.x1 && y >= c.bbox.y0 && y <= c.bbox.y1);
                }
            }
            // Tight boxes: each edge of the bbox touches a member pixel.
            for (ci, c) in lab.components.iter().enumerate() {
                let members: Vec<usize> = lab.labels.iter().enumerate()
                    .filter(|(_, &l)| l as usize == ci + 1).map(|(i, _)| i).collect();
                prop_assert_eq!(members.len(), c.pixel_count);
                prop_assert!(members.iter().any(|&i| i % b.width() == c.bbox.x0));
                prop_assert!(members.iter().any(|&i| i % b.width() == c.bbox.x1));
                prop_assert!(members.iter().any(|&i| i / b.width() == c.bbox.y0));
                prop_assert!(members.iter().any(|&i| i / b.width() == c.bbox.y1));
            }
            let keys: Vec<_> = lab.components.iter().map(|c| (c.bbox.y0, c.bbox.x0, c.pixel_count)).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            prop_assert_eq!(keys, sorted);
        }
    }
}
