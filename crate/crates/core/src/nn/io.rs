//! Model file: `CNNM`, version u32, config length u32, config TOML text,
//! then each weight and bias tensor as (ndims u32, extents u32..., f32
//! data), all little endian, closed by a CRC32 of every preceding byte.

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::network::ModelParams;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"CNNM";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(config: &ModelConfig, params: &ModelParams) -> Result<Vec<u8>> {
    params.check(config)?;
    let text = config.to_toml();
    let mut out = Vec::with_capacity(16 + text.len() + params.num_params() * 4);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    for (_, t) in params.tensors() {
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format("model file is truncated".into()));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<(ModelConfig, ModelParams)> {
    if bytes.len() < 8 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "model file version {version}, expected {MODEL_VERSION}"
        )));
    }
    if bytes.len() < 16 {
        return Err(Error::Format("model file is truncated".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(Error::Format("model file checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let len = r.u32()? as usize;
    let text =
        std::str::from_utf8(r.take(len)?).map_err(|_| Error::Format("model config is not UTF-8".into()))?;
    let config = ModelConfig::from_toml(text).map_err(|e| Error::Format(format!("model config: {e}")))?;
    let mut params = ModelParams::<f32>::zeros(&config)?;
    for (layer, t) in params.tensors_mut() {
        let ndims = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndims.min(4));
        for _ in 0..ndims {
            shape.push(r.u32()? as usize);
        }
        if shape != t.shape() {
            return Err(Error::Format(format!(
                "layer {layer} tensor has extents {shape:?}, config implies {:?}",
                t.shape()
            )));
        }
        let raw = r.take(t.len() * 4)?;
        for (v, b) in t.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap());
        }
    }
    if r.pos != body.len() {
        return Err(Error::Format(format!(
            "{} unexpected bytes after the last tensor",
            body.len() - r.pos
        )));
    }
    if !params.all_finite() {
        return Err(Error::Format("model file holds non-finite parameters".into()));
    }
    Ok((config, params))
}

pub fn save_model(path: &Path, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    fs::write(path, encode_model(config, params)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
