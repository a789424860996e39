//! `.mgck` checkpoint container.
//!
//! Layout: the 4-byte magic `MGCK`, a little-endian `u64` header length, a
//! JSON header, then every tensor as little-endian `f64` in manifest order.
//! Offsets in the manifest are byte offsets into the data section.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::CharVocab;
use crate::error::CheckpointError;
use crate::model::{CharModel, ModelConfig, ModelParams};

pub const MAGIC: &[u8; 4] = b"MGCK";
pub const FORMAT_VERSION: u32 = 1;
pub const EXTENSION: &str = "mgck";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocab: CharVocab,
    pub tensors: Vec<TensorEntry>,
}

/// Serializes a model into checkpoint bytes.
pub fn encode_checkpoint(params: &ModelParams<f64>, cfg: &ModelConfig, vocab: &CharVocab) -> Vec<u8> {
    let mut tensors = Vec::new();
    let mut offset = 0;
    for ((name, shape), data) in cfg.tensor_shapes().into_iter().zip(params.tensors()) {
        tensors.push(TensorEntry { name, shape, offset, length: data.len() });
        offset += data.len() * 8;
    }
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        vocab: vocab.clone(),
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for data in params.tensors() {
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<CharModel, CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let len_bytes: [u8; 8] = bytes
        .get(4..12)
        .ok_or(CheckpointError::TruncatedHeader)?
        .try_into()
        .expect("slice of 8");
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let header_end = 12usize.checked_add(header_len).ok_or(CheckpointError::TruncatedHeader)?;
    let json = bytes.get(12..header_end).ok_or(CheckpointError::TruncatedHeader)?;

    let raw: serde_json::Value = serde_json::from_slice(json)?;
    let version = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let header: CheckpointHeader = serde_json::from_value(raw)?;
    let cfg = header.config;
    cfg.validate().map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    if header.vocab.size() != cfg.vocab_size {
        return Err(CheckpointError::Manifest(format!(
            "vocabulary has {} symbols but config says {}",
            header.vocab.size(),
            cfg.vocab_size
        )));
    }

    let expected = cfg.tensor_shapes();
    if expected.len() != header.tensors.len() {
        return Err(CheckpointError::Manifest(format!(
            "{} tensors listed, config needs {}",
            header.tensors.len(),
            expected.len()
        )));
    }
    let mut offset = 0;
    for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
        let count: usize = shape.iter().product();
        if &entry.name != name || &entry.shape != shape || entry.length != count || entry.offset != offset {
            return Err(CheckpointError::Manifest(format!(
                "tensor {:?} {:?} at {} does not match expected {name:?} {shape:?} at {offset}",
                entry.name, entry.shape, entry.offset
            )));
        }
        offset += count * 8;
    }

    let data = &bytes[header_end..];
    if data.len() < offset {
        return Err(CheckpointError::TruncatedData { needed: offset, found: data.len() });
    }
    if data.len() > offset {
        return Err(CheckpointError::Manifest(format!(
            "{} trailing bytes after tensor data",
            data.len() - offset
        )));
    }
    let mut params = ModelParams::<f64>::zeros(&cfg);
    let mut chunks = data.chunks_exact(8);
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            let chunk = chunks.next().expect("length checked above");
            *v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        }
    }
    Ok(CharModel::new(cfg, header.vocab, params))
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams<f64>,
    cfg: &ModelConfig,
    vocab: &CharVocab,
) -> Result<(), CheckpointError> {
    let bytes = encode_checkpoint(params, cfg, vocab);
    let tmp = path.with_extension("mgck.tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CharModel, CheckpointError> {
    decode_checkpoint(&std::fs::read(path)?)
}

impl CharModel {
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        save_checkpoint(path, &self.params, &self.config, &self.vocab)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        load_checkpoint(path)
    }
}
