//! Binary PGM (P5) / PPM (P6) reading and writing, plus PNG input.

use std::fs;
use std::path::Path;

use super::{to_grayscale, GrayImage, RgbImage};
use crate::error::{Error, Result};

/// Loads a grayscale image from PGM, PPM or PNG. Color inputs are reduced
/// with [`to_grayscale`].
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        let pnm = parse_pnm(bytes)?;
        return if pnm.channels == 1 {
            GrayImage::new(pnm.width, pnm.height, pnm.pixels)
        } else {
            to_grayscale(pnm.width, pnm.height, &pnm.pixels)
        };
    }
    if bytes.starts_with(b"\x89PNG") {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| Error::Format(format!("png decode failed: {e}")))?;
        return match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                GrayImage::new(w as usize, h as usize, g.into_raw())
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                to_grayscale(w as usize, h as usize, rgb.as_raw())
            }
        };
    }
    Err(Error::Format(
        "unsupported image format (expected P5, P6 or PNG)".into(),
    ))
}

struct Pnm {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

fn parse_pnm(bytes: &[u8]) -> Result<Pnm> {
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(Error::Format("bad PNM magic".into())),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        skip_space_and_comments(bytes, &mut pos);
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PNM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad PNM header number".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PNM maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("PNM dimensions must be positive".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated PNM header".into()));
    }
    pos += 1;
    let need = width * height * channels;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Format(format!("PNM raster truncated: need {need} bytes")))?;
    let pixels = if maxval == 255 {
        raster.to_vec()
    } else {
        raster
            .iter()
            .map(|&v| ((v.min(maxval as u8) as usize * 255 + maxval / 2) / maxval) as u8)
            .collect()
    };
    Ok(Pnm {
        width,
        height,
        channels,
        pixels,
    })
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        if bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        } else if bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

/// Reads a P6 file as color.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(b"P6") {
        return Err(Error::Format(format!("{}: not a P6 file", path.display())));
    }
    let pnm = parse_pnm(&bytes)?;
    RgbImage::new(pnm.width, pnm.height, pnm.pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage::new(3, 2, vec![0, 10, 20, 30, 40, 255]).unwrap();
        assert_eq!(decode_gray(&encode_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn ppm_decodes_to_luma() {
        let rgb = RgbImage::new(2, 1, vec![255, 0, 0, 255, 255, 255]).unwrap();
        let g = decode_gray(&encode_ppm(&rgb)).unwrap();
        assert_eq!(g.data(), &[76, 255]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x00\xff";
        assert_eq!(decode_gray(bytes).unwrap().data(), &[0, 255]);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let bytes = b"P5\n4 4\n255\n\x00\x00";
        assert!(matches!(decode_gray(bytes), Err(Error::Format(_))));
        assert!(matches!(decode_gray(b"GIF89a"), Err(Error::Format(_))));
    }

    #[test]
    fn png_gray_and_rgb() {
        let mut buf = std::io::Cursor::new(Vec::new());
        image::GrayImage::from_raw(2, 2, vec![1, 2, 3, 4])
            .unwrap()
            .write_to(&mut buf, image::ImageFormat::Png)
            .unwrap();
        assert_eq!(decode_gray(buf.get_ref()).unwrap().data(), &[1, 2, 3, 4]);

        let mut buf = std::io::Cursor::new(Vec::new());
        image::RgbImage::from_raw(1, 1, vec![255, 0, 0])
            .unwrap()
            .write_to(&mut buf, image::ImageFormat::Png)
            .unwrap();
        assert_eq!(decode_gray(buf.get_ref()).unwrap().data(), &[76]);
    }
}
