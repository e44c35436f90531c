use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::dataset::{Dataset, Frame, FrameRole};
use super::image::{FieldImage, ImageSpec, CHANNELS};
use crate::error::{Error, Result};
use crate::kv::{KvDocument, KvWriter};

pub const DATASET_MAGIC: &[u8; 8] = b"QDMSIM1\0";
const HEADER_LEN: usize = 8 + 4 * 4;

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Serializes the frames to the binary container layout.
pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    let (h, w) = (dataset.spec.height, dataset.spec.width);
    let per_frame = h * w * CHANNELS;
    let mut out = Vec::with_capacity(HEADER_LEN + dataset.frames.len() * (12 + 4 * per_frame));
    out.extend_from_slice(DATASET_MAGIC);
    for v in [h, w, CHANNELS, dataset.frames.len()] {
        let v = u32::try_from(v).map_err(|_| Error::Shape(format!("{v} does not fit in u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for f in &dataset.frames {
        if f.image.shape() != (h, w) {
            return Err(Error::Shape(format!(
                "frame {} is {:?}, dataset is {h}x{w}",
                f.index,
                f.image.shape()
            )));
        }
        out.extend_from_slice(&f.role.code().to_le_bytes());
        out.extend_from_slice(&f.chip_id.to_le_bytes());
        out.extend_from_slice(&f.index.to_le_bytes());
        for v in f.image.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses container bytes into `(height, width, frames)`.
pub fn decode_frames(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<Frame>)> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != DATASET_MAGIC {
        return Err(format_err(path, "not a dataset container (bad magic)"));
    }
    let word = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let (h, w, ch, n) = (
        word(8) as usize,
        word(12) as usize,
        word(16) as usize,
        word(20) as usize,
    );
    if ch != CHANNELS {
        return Err(format_err(path, format!("expected {CHANNELS} channels, found {ch}")));
    }
    let per_frame = h * w * CHANNELS;
    let frame_bytes = 12 + 4 * per_frame;
    let expected = HEADER_LEN + n * frame_bytes;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("size {} does not match header ({expected} bytes expected)", bytes.len()),
        ));
    }
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let off = HEADER_LEN + i * frame_bytes;
        let role = FrameRole::from_code(word(off))
            .ok_or_else(|| format_err(path, format!("frame {i}: unknown role {}", word(off))))?;
        let data: Vec<f32> = bytes[off + 12..off + frame_bytes]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        frames.push(Frame {
            image: FieldImage::from_vec(h, w, data)?,
            index: word(off + 8),
            role,
            chip_id: word(off + 4),
        });
    }
    Ok((h, w, frames))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn manifest_text(dataset: &Dataset, checksum: &str) -> String {
    let s = &dataset.spec;
    let mut w = KvWriter::new();
    w.comment("dataset manifest");
    w.put("checksum.sha256", checksum)
        .put("frames", dataset.frames.len())
        .put("seed", dataset.seed)
        .put("noise.sigma", dataset.noise_sigma)
        .put("image.height", s.height)
        .put("image.width", s.width)
        .put("image.pixel_pitch", s.pixel_pitch)
        .put("image.standoff", s.standoff)
        .put_list("image.origin", &s.origin)
        .put("image.rail_z", s.rail_z);
    for (k, v) in &dataset.metadata {
        w.put(k, v);
    }
    w.finish()
}

/// Writes the container and its `.manifest` sidecar; returns the SHA-256 of
/// the container bytes.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<String> {
    let bytes = encode_dataset(dataset)?;
    let checksum = sha256_hex(&bytes);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, &bytes)?;
    fs::write(manifest_path(path), manifest_text(dataset, &checksum))?;
    Ok(checksum)
}

const MANIFEST_CORE: [&str; 10] = [
    "checksum.sha256",
    "frames",
    "seed",
    "noise.sigma",
    "image.height",
    "image.width",
    "image.pixel_pitch",
    "image.standoff",
    "image.origin",
    "image.rail_z",
];

/// Reads a container. The sidecar manifest, when present, supplies the image
/// geometry, seed and metadata and its checksum is verified; without one the
/// geometry defaults apart from height and width.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let (h, w, frames) = decode_frames(&bytes, path)?;
    let mut dataset = Dataset {
        frames,
        spec: ImageSpec {
            height: h,
            width: w,
            ..ImageSpec::default()
        },
        noise_sigma: 0.0,
        seed: 0,
        metadata: Vec::new(),
    };
    let mpath = manifest_path(path);
    if !mpath.exists() {
        return Ok(dataset);
    }
    let text = fs::read_to_string(&mpath)?;
    let doc = KvDocument::parse(&text, &mpath.display().to_string())?;
    if let Some(sum) = doc.get("checksum.sha256") {
        let actual = sha256_hex(&bytes);
        if sum.value != actual {
            return Err(format_err(
                path,
                format!("checksum mismatch: manifest {} vs file {actual}", sum.value),
            ));
        }
    }
    let spec = &mut dataset.spec;
    spec.pixel_pitch = doc.parse_or("image.pixel_pitch", spec.pixel_pitch)?;
    spec.standoff = doc.parse_or("image.standoff", spec.standoff)?;
    spec.rail_z = doc.parse_or("image.rail_z", spec.rail_z)?;
    if let Some(o) = doc.parse_list::<f64>("image.origin")? {
        if o.len() != 2 {
            return Err(doc.entry_error(doc.get("image.origin").unwrap(), "origin needs two values"));
        }
        spec.origin = [o[0], o[1]];
    }
    for (key, actual) in [("image.height", h), ("image.width", w)] {
        if let Some(v) = doc.parse_opt::<usize>(key)? {
            if v != actual {
                return Err(format_err(path, format!("manifest {key} = {v}, container has {actual}")));
            }
        }
    }
    dataset.noise_sigma = doc.parse_or("noise.sigma", 0.0)?;
    dataset.seed = doc.parse_or("seed", 0)?;
    dataset.metadata = doc
        .entries()
        .iter()
        .filter(|e| !MANIFEST_CORE.contains(&e.key.as_str()))
        .map(|e| (e.key.clone(), e.value.clone()))
        .collect();
    Ok(dataset)
}
