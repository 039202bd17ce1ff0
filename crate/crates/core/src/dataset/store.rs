//! Dataset containers.
//!
//! Directory form: `manifest.tsv` with one row per sample
//! (`class_id sign_name variant_id augment_id split path`) next to a
//! `glyphs/` folder of PGM files.
//!
//! Packed form: 16-byte header (`CUNE`, version u32, sample count u32,
//! glyph side u32, little endian) followed by fixed-size records:
//! class_id u32, variant_id u16, augment_id u16, split u8, three zero pad
//! bytes, then the glyph bit-packed row-major, MSB first.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DatasetSplit, Sample};
use crate::error::{Error, Result};
use crate::imaging::io::{read_gray, write_pgm};
use crate::segmentation::GlyphImage;

pub const PACKED_MAGIC: &[u8; 4] = b"CUNE";
pub const PACKED_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;
const RECORD_META: usize = 12;

/// A split dataset plus the class names needed to interpret it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub glyph_size: usize,
    pub class_names: Vec<String>,
    pub split: DatasetSplit,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

fn sample_file(s: &Sample) -> String {
    format!(
        "glyphs/c{:04}_v{:02}_a{:02}.pgm",
        s.class_id, s.variant_id, s.augment_id
    )
}

pub fn save_dir(dir: &Path, ds: &Dataset) -> Result<()> {
    let glyphs = dir.join("glyphs");
    fs::create_dir_all(&glyphs).map_err(|e| Error::io(&glyphs, e))?;
    let mut manifest = String::from("class_id\tsign_name\tvariant_id\taugment_id\tsplit\tpath\n");
    for (split, part) in ds.split.parts() {
        for s in part {
            let name = ds
                .class_names
                .get(s.class_id)
                .ok_or_else(|| Error::Input(format!("sample class {} has no name", s.class_id)))?;
            let rel = sample_file(s);
            write_pgm(dir.join(&rel), &s.image.to_gray())?;
            writeln!(
                manifest,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.class_id, name, s.variant_id, s.augment_id, split, rel
            )
            .expect("string write");
        }
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

pub fn load_dir(dir: &Path) -> Result<Dataset> {
    let path = dir.join("manifest.tsv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |line: usize, msg: &str| Error::Format(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("class_id\t") => {}
        _ => return Err(bad(1, "missing manifest header")),
    }
    let mut names: Vec<Option<String>> = Vec::new();
    let mut split = DatasetSplit::default();
    let mut side: Option<usize> = None;
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(bad(lineno, "expected 6 columns"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(lineno, "bad integer field"));
        let (class_id, variant_id, augment_id) = (num(cols[0])?, num(cols[2])?, num(cols[3])?);
        if names.len() <= class_id {
            names.resize(class_id + 1, None);
        }
        match &names[class_id] {
            Some(n) if n != cols[1] => return Err(bad(lineno, "class has two sign names")),
            Some(_) => {}
            None => names[class_id] = Some(cols[1].to_string()),
        }
        let gray = read_gray(dir.join(cols[5]))?;
        if gray.width() != gray.height() || side.is_some_and(|s| s != gray.width()) {
            return Err(bad(lineno, "glyph size differs from the rest of the dataset"));
        }
        side = Some(gray.width());
        let image = GlyphImage::new(gray.width(), gray.data().iter().map(|&v| v < 128).collect())?;
        let sample = Sample {
            image,
            class_id,
            variant_id,
            augment_id,
        };
        match cols[4] {
            "train" => split.train.push(sample),
            "val" => split.val.push(sample),
            "test" => split.test.push(sample),
            _ => return Err(bad(lineno, "split must be train, val or test")),
        }
    }
    let glyph_size = side.ok_or_else(|| bad(1, "dataset has no samples"))?;
    let class_names = names
        .into_iter()
        .enumerate()
        .map(|(c, n)| n.ok_or_else(|| Error::Format(format!("class {c} has no samples"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        glyph_size,
        class_names,
        split,
    })
}

fn record_len(side: usize) -> usize {
    RECORD_META + (side * side).div_ceil(8)
}

pub fn encode_packed(split: &DatasetSplit, side: usize) -> Result<Vec<u8>> {
    let count = split.len();
    let mut out = Vec::with_capacity(HEADER_LEN + count * record_len(side));
    out.extend_from_slice(PACKED_MAGIC);
    out.extend_from_slice(&PACKED_VERSION.to_le_bytes());
    out.extend_from_slice(&(count as u32).to_le_bytes());
    out.extend_from_slice(&(side as u32).to_le_bytes());
    for (tag, (_, part)) in split.parts().iter().enumerate() {
        for s in part.iter() {
            if s.image.side() != side {
                return Err(Error::Input(format!(
                    "sample side {} differs from dataset side {side}",
                    s.image.side()
                )));
            }
            let (v, a) = (
                u16::try_from(s.variant_id).map_err(|_| Error::Input("variant id overflow".into()))?,
                u16::try_from(s.augment_id).map_err(|_| Error::Input("augment id overflow".into()))?,
            );
            out.extend_from_slice(&(s.class_id as u32).to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&[tag as u8, 0, 0, 0]);
            let mut bits = vec![0u8; (side * side).div_ceil(8)];
            for (i, &b) in s.image.data().iter().enumerate() {
                if b {
                    bits[i / 8] |= 0x80 >> (i % 8);
                }
            }
            out.extend_from_slice(&bits);
        }
    }
    Ok(out)
}

pub fn decode_packed(bytes: &[u8]) -> Result<(usize, DatasetSplit)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != PACKED_MAGIC {
        return Err(Error::Format("not a packed dataset (bad magic)".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let version = word(4) as u32;
    if version != PACKED_VERSION {
        return Err(Error::Format(format!(
            "packed dataset version {version}, expected {PACKED_VERSION}"
        )));
    }
    let (count, side) = (word(8), word(12));
    if side == 0 {
        return Err(Error::Format("packed dataset glyph side is 0".into()));
    }
    let rec = record_len(side);
    let body = bytes.len() - HEADER_LEN;
    if body != count * rec {
        return Err(Error::Format(format!(
            "header declares {count} samples but body holds {} bytes ({} records)",
            body,
            body as f64 / rec as f64
        )));
    }
    let mut split = DatasetSplit::default();
    for r in bytes[HEADER_LEN..].chunks_exact(rec) {
        let class_id = u32::from_le_bytes(r[0..4].try_into().unwrap()) as usize;
        let variant_id = u16::from_le_bytes(r[4..6].try_into().unwrap()) as usize;
        let augment_id = u16::from_le_bytes(r[6..8].try_into().unwrap()) as usize;
        let data = (0..side * side)
            .map(|i| r[RECORD_META + i / 8] & (0x80 >> (i % 8)) != 0)
            .collect();
        let sample = Sample {
            image: GlyphImage::new(side, data)?,
            class_id,
            variant_id,
            augment_id,
        };
        match r[8] {
            0 => split.train.push(sample),
            1 => split.val.push(sample),
            2 => split.test.push(sample),
            t => return Err(Error::Format(format!("bad split tag {t}"))),
        }
    }
    Ok((side, split))
}

pub fn save_packed(path: &Path, split: &DatasetSplit, side: usize) -> Result<()> {
    fs::write(path, encode_packed(split, side)?).map_err(|e| Error::io(path, e))
}

pub fn load_packed(path: &Path) -> Result<(usize, DatasetSplit)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_packed(&bytes)
}
