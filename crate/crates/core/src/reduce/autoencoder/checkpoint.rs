use std::fs;
use std::path::Path;

use super::arch::Architecture;
use super::model::Autoencoder;
use crate::error::{Error, Result};
use crate::kv::{KvDocument, KvWriter};
use crate::scalar::Real;

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"QDMAE1\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Magic, u32 version, u32-length architecture block (key = value text),
/// u32 parameter count, then little-endian f32 parameters.
pub fn encode_checkpoint<T: Real>(model: &Autoencoder<T>) -> Vec<u8> {
    let (c, h, w) = model.input_shape();
    let mut kv = KvWriter::new();
    kv.put("architecture", model.architecture())
        .put("input.channels", c)
        .put("input.height", h)
        .put("input.width", w)
        .put("seed", model.seed)
        .put("epochs_trained", model.epochs_trained);
    let desc = kv.finish();
    let params = model.params();
    let mut out = Vec::with_capacity(19 + desc.len() + 4 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(desc.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.to_f64_lossy() as f32).to_le_bytes());
    }
    out
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8], path: &Path) -> Result<Autoencoder<T>> {
    let bad = |m: String| Error::Format {
        path: path.to_path_buf(),
        message: m,
    };
    if bytes.len() < 15 || &bytes[..7] != CHECKPOINT_MAGIC {
        return Err(bad("not an autoencoder checkpoint (bad magic)".into()));
    }
    let word = |off: usize| -> Result<u32> {
        bytes
            .get(off..off + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| bad("truncated checkpoint".into()))
    };
    let version = word(7)?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let dlen = word(11)? as usize;
    let desc = bytes
        .get(15..15 + dlen)
        .and_then(|b| std::str::from_utf8(b).ok())
        .ok_or_else(|| bad("unreadable architecture block".into()))?;
    let doc = KvDocument::parse(desc, &path.display().to_string())?;
    let req = |k: &str| -> Result<usize> {
        doc.parse_opt::<usize>(k)?
            .ok_or_else(|| bad(format!("architecture block lacks {k}")))
    };
    let arch_text = doc
        .get("architecture")
        .ok_or_else(|| bad("architecture block lacks architecture".into()))?;
    let arch = Architecture::parse(&arch_text.value)?;
    let mut model = Autoencoder::<T>::with_channels(
        arch,
        req("input.channels")?,
        req("input.height")?,
        req("input.width")?,
        doc.parse_or("seed", 0u64)?,
    )?;
    model.epochs_trained = doc.parse_or("epochs_trained", 0usize)?;
    let off = 15 + dlen;
    let count = word(off)? as usize;
    let blob = &bytes[off + 4..];
    if count != model.params().len() || blob.len() != 4 * count {
        return Err(bad(format!(
            "parameter blob holds {} bytes for {count} values; architecture needs {}",
            blob.len(),
            model.params().len()
        )));
    }
    let params = blob
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    model.set_params(params)?;
    Ok(model)
}

pub fn save_checkpoint<T: Real>(model: &Autoencoder<T>, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Autoencoder<T>> {
    decode_checkpoint(&fs::read(path)?, path)
}
