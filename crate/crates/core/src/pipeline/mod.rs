//! End-to-end studies: simulate two chips, detect, sweep.
//!
//! Chip identity is needed twice: base subtraction works per acquisition
//! (one chip on the stage at a time), and the final scoring. In between, the
//! reduction and clustering stages only ever receive images or latent
//! points.

mod artifacts;
mod detect;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use artifacts::{cluster_gray, diverging_rgb, scatter_map, trend_plot, write_field_ppm, write_pgm, write_ppm, MAP_SIZE};
pub use detect::{
    cluster_points, detect, reduce_cnn, reduce_pca, report_csv, split_indices, write_detection, Detection, MethodResult,
    Split,
};
pub use sweep::{run_sweep, sweep_table, write_sweep, SweepRecord};

use crate::config::{ExperimentConfig, OdmrConfig};
use crate::error::{Error, Result};
use crate::fieldsynth::{capture_frames, read_dataset, sha256_hex, write_dataset, Dataset, FieldImage, FrameRole, CHANNELS};
use crate::logicsim::LogicDesign;
use crate::odmr::{extract_field, fit_lorentzian, synthesize_odmr};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REFERENCE_CHIP: u32 = 0;
pub const TEST_CHIP: u32 = 1;

/// Independent sub-seed for one purpose (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed.wrapping_add(tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Short name such as `counter200` or `counter200+counter:8/1`.
pub fn design_label(design: &LogicDesign) -> String {
    let base = format!("{}{}", design.base.kind().as_str(), design.base.width());
    match &design.trojan {
        Some(t) if t.enable => format!("{base}+{}:{}/{}", t.kind.as_str(), t.scale, t.frequency_divider),
        Some(t) => format!("{base}+{}:{}/{}(off)", t.kind.as_str(), t.scale, t.frequency_divider),
        None => base,
    }
}

/// Replaces each pixel by the axis field recovered from a fitted, noisy
/// spectrum (bias removed). The result holds B_parallel in channel 2.
pub fn odmr_measure(clean: &FieldImage<f64>, odmr: &OdmrConfig, seed: u64) -> Result<FieldImage<f64>> {
    let spec = odmr.spec();
    let noise = spec.noise_for_snr(odmr.snr);
    let (h, w) = clean.shape();
    let values: Vec<f64> = (0..h * w)
        .into_par_iter()
        .map(|p| {
            let (r, c) = (p / w, p % w);
            let b = [clean.get(r, c, 0), clean.get(r, c, 1), clean.get(r, c, 2)];
            let s = synthesize_odmr(b, &spec, noise, derive_seed(seed, p as u64))?;
            let fit = fit_lorentzian(&s, &spec)?;
            let (b_par, _) = extract_field(fit.f_minus, fit.f_plus, &spec)?;
            Ok(b_par - spec.bias_field)
        })
        .collect::<Result<_>>()?;
    let mut out = FieldImage::zeros(h, w);
    for (p, v) in values.into_iter().enumerate() {
        out.set(p / w, p % w, CHANNELS - 1, v);
    }
    Ok(out)
}

/// Both chips' captures in one dataset: reference as chip 0, test as chip 1.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let setup = cfg.setup()?;
    let sigma = setup.resolved_noise_sigma()?;
    let mut cleans = Vec::with_capacity(2);
    for (ci, (design, chip)) in [(&cfg.reference, REFERENCE_CHIP), (&cfg.test, TEST_CHIP)].into_iter().enumerate() {
        let mut clean = setup.render_clean(design)?;
        if cfg.odmr.enabled {
            clean = odmr_measure(&clean, &cfg.odmr, derive_seed(cfg.seed, 100 + ci as u64))?;
        }
        cleans.push((clean, chip));
    }
    let mut ds = capture_frames(&cleans, &setup.image, sigma, &setup.drift, &cfg.protocol, cfg.seed)?;
    ds.metadata = vec![
        ("tool.version".into(), VERSION.into()),
        ("odmr.enabled".into(), cfg.odmr.enabled.to_string()),
    ];
    Ok(ds)
}

fn chip_metadata(ds: &mut Dataset, role: &str, design: &LogicDesign) {
    ds.metadata.push(("chip.role".into(), role.into()));
    ds.metadata.push(("design.label".into(), design_label(design)));
    ds.metadata.push(("design.trojan_active".into(), design.has_active_trojan().to_string()));
}

/// Writes the exact resolved config and a provenance record.
pub fn write_provenance(dir: &Path, cfg: &ExperimentConfig, command: &str, inputs: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let text = cfg.resolved()?.to_text();
    fs::write(dir.join("config.txt"), &text)?;
    let mut p = String::new();
    p.push_str(&format!("tool = qdm-trojan\nversion = {VERSION}\ncommand = {command}\nseed = {}\n", cfg.seed));
    p.push_str(&format!("config_sha256 = {}\n", sha256_hex(text.as_bytes())));
    for (name, sum) in inputs {
        p.push_str(&format!("input.{name} = {sum}\n"));
    }
    fs::write(dir.join("provenance.txt"), p)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFile {
    pub path: PathBuf,
    pub checksum: String,
    pub frames: usize,
}

/// Simulates both chips and writes one container per chip
/// (`reference.qdm`, `test.qdm`) with manifests.
pub fn cmd_generate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<GeneratedFile>> {
    let ds = simulate(cfg)?;
    let mut out = Vec::new();
    for (name, chip, design) in [("reference", REFERENCE_CHIP, &cfg.reference), ("test", TEST_CHIP, &cfg.test)] {
        let mut part = ds.chip(chip);
        chip_metadata(&mut part, name, design);
        let path = out_dir.join(format!("{name}.qdm"));
        let checksum = write_dataset(&path, &part)?;
        out.push(GeneratedFile {
            path,
            checksum,
            frames: part.frames.len(),
        });
    }
    let inputs: Vec<(String, String)> = out
        .iter()
        .map(|f| (f.path.file_name().unwrap().to_string_lossy().into_owned(), f.checksum.clone()))
        .collect();
    write_provenance(out_dir, cfg, "generate", &inputs)?;
    Ok(out)
}

/// Loads two single-chip containers into one dataset; the first is the
/// reference. Frame indices of the second are shifted past the first.
/// Returns the dataset, the reference chip id, whether the test chip is
/// recorded as trojan-inserted (if the manifest says), and the checksums.
pub fn load_pair(paths: &[PathBuf]) -> Result<(Dataset, u32, Option<bool>, Vec<(String, String)>)> {
    if paths.len() != 2 {
        return Err(Error::Usage(format!(
            "detect compares exactly two datasets (reference, test), got {}",
            paths.len()
        )));
    }
    let mut parts = Vec::new();
    let mut sums = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(Error::Usage(format!("dataset {} does not exist", p.display())));
        }
        let ds = read_dataset(p)?;
        let chips = ds.chip_ids();
        if chips.len() != 1 {
            return Err(Error::Protocol(format!(
                "{} holds chips {chips:?}; expected one chip per file",
                p.display()
            )));
        }
        let bytes = fs::read(p)?;
        sums.push((p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(), sha256_hex(&bytes)));
        parts.push(ds);
    }
    let (a, b) = (&parts[0], &parts[1]);
    if a.spec.height != b.spec.height || a.spec.width != b.spec.width {
        return Err(Error::Shape(format!(
            "image shapes differ: {}x{} vs {}x{}",
            a.spec.height, a.spec.width, b.spec.height, b.spec.width
        )));
    }
    let (ca, cb) = (a.chip_ids()[0], b.chip_ids()[0]);
    if ca == cb {
        return Err(Error::Protocol(format!("both datasets hold chip {ca}")));
    }
    let offset = a.frames.iter().map(|f| f.index + 1).max().unwrap_or(0);
    let mut merged = b.clone_header();
    merged.frames = a.frames.clone();
    merged.frames.extend(b.frames.iter().map(|f| {
        let mut f = f.clone();
        f.index += offset;
        f
    }));
    let trojan = b
        .metadata
        .iter()
        .find(|(k, _)| k == "design.trojan_active")
        .and_then(|(_, v)| v.parse().ok());
    if let Some((_, v)) = a.metadata.iter().find(|(k, _)| k == "design.label") {
        merged.metadata.push(("reference.label".into(), v.clone()));
    }
    Ok((merged, ca, trojan, sums))
}

/// Detection on two containers; writes reports and plots to `out_dir`.
pub fn cmd_detect(paths: &[PathBuf], cfg: &ExperimentConfig, out_dir: &Path) -> Result<Detection> {
    let (ds, reference, recorded, sums) = load_pair(paths)?;
    let test_is_trojan = recorded.unwrap_or_else(|| cfg.test.has_active_trojan());
    let det = detect(&ds, reference, test_is_trojan, cfg)?;
    write_provenance(out_dir, cfg, "detect", &sums)?;
    write_detection(out_dir, &det, &ds, cfg)?;
    Ok(det)
}

/// Runs the configured sweep and writes its tables and trend plot.
pub fn cmd_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<SweepRecord>> {
    let records = run_sweep(cfg, cfg.sweep.axis, &cfg.sweep.values, &cfg.sweep.seeds)?;
    write_provenance(out_dir, cfg, "sweep", &[])?;
    write_sweep(out_dir, cfg, &records)?;
    Ok(records)
}

/// Human-readable summary of a container and its manifest.
pub fn inspect(path: &Path) -> Result<String> {
    let ds = read_dataset(path)?;
    let bytes = fs::read(path)?;
    let mut s = String::new();
    s.push_str(&format!("file:        {}\n", path.display()));
    s.push_str(&format!("sha256:      {}\n", sha256_hex(&bytes)));
    s.push_str(&format!("image:       {} x {} x {}\n", ds.spec.height, ds.spec.width, CHANNELS));
    s.push_str(&format!(
        "pixel pitch: {} um, standoff {} um, origin ({}, {})\n",
        ds.spec.pixel_pitch, ds.spec.standoff, ds.spec.origin[0], ds.spec.origin[1]
    ));
    s.push_str(&format!("noise sigma: {:.6e} uT\nseed:        {}\n", ds.noise_sigma, ds.seed));
    for chip in ds.chip_ids() {
        let part = ds.chip(chip);
        s.push_str(&format!(
            "chip {chip}:      {} frames ({} test, {} base)\n",
            part.frames.len(),
            part.count(FrameRole::Test),
            part.count(FrameRole::Base)
        ));
    }
    for (k, v) in &ds.metadata {
        s.push_str(&format!("{k} = {v}\n"));
    }
    Ok(s)
}
