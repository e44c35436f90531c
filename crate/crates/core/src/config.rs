//! Experiment configuration: one flat `section.key = value` file.
//!
//! ```text
//! reference.base.kind = counter
//! test.trojan.kind = counter
//! test.trojan.scale = 8
//! image.standoff = 50
//! noise.sigma = auto
//! reduce.method = both
//! sim.seed = 7
//! ```
//!
//! Every key has a default. [`ExperimentConfig::to_text`] writes all of them
//! with `auto` settings resolved to numbers, and parsing that text gives back
//! the same resolved config.

use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::fieldsynth::{calibrate_noise, DriftModel, ImageSpec, Protocol, SimulationSetup};
use crate::kv::{KvDocument, KvWriter};
use crate::layoutpower::{CurrentWeights, PadSide, PowerGridSpec, Rect};
use crate::logicsim::{design_from_kv, design_to_kv, BaseCircuit, LogicDesign, TrojanKind, TrojanSpec};
use crate::odmr::{uniform_grid, OdmrSpec, ZERO_FIELD_SPLITTING};
use crate::preprocess::{CropRect, Highpass, PreprocessConfig};
use crate::reduce::autoencoder::Optimizer;
use crate::reduce::{Architecture, TrainConfig, DEFAULT_COMPONENTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pca,
    Cnn,
    Both,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Cnn => "cnn",
            Method::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pca" => Some(Method::Pca),
            "cnn" => Some(Method::Cnn),
            "both" => Some(Method::Both),
            _ => None,
        }
    }

    pub fn runs_pca(self) -> bool {
        matches!(self, Method::Pca | Method::Both)
    }

    pub fn runs_cnn(self) -> bool {
        matches!(self, Method::Cnn | Method::Both)
    }
}

/// A numeric setting that may be derived from others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Auto,
    Value(f64),
}

impl Setting {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Setting::Auto);
        }
        s.parse::<f64>().map(Setting::Value).map_err(|e| format!("expected `auto` or a number: {e}"))
    }

    pub fn or(self, auto: f64) -> f64 {
        match self {
            Setting::Auto => auto,
            Setting::Value(v) => v,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Auto => f.write_str("auto"),
            Setting::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    TrojanScale,
    FrequencyDivider,
    NoiseSigma,
    Standoff,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::TrojanScale => "trojan_scale",
            SweepAxis::FrequencyDivider => "frequency_divider",
            SweepAxis::NoiseSigma => "noise_sigma",
            SweepAxis::Standoff => "standoff",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "trojan_scale" => Some(SweepAxis::TrojanScale),
            "frequency_divider" => Some(SweepAxis::FrequencyDivider),
            "noise_sigma" => Some(SweepAxis::NoiseSigma),
            "standoff" => Some(SweepAxis::Standoff),
            _ => None,
        }
    }
}

/// Optional spectroscopic measurement layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdmrConfig {
    pub enabled: bool,
    /// Axis field added to every pixel, microtesla.
    pub bias_field: f64,
    pub linewidth: f64,
    pub contrast: f64,
    /// Dip depth over spectral noise sigma.
    pub snr: f64,
    pub grid_step: f64,
}

impl Default for OdmrConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            bias_field: 500.0,
            linewidth: 1.0,
            contrast: 0.02,
            snr: 50.0,
            grid_step: 0.05,
        }
    }
}

impl OdmrConfig {
    /// Resonance model with a grid covering both dips plus eight linewidths.
    pub fn spec(&self) -> OdmrSpec {
        let base = OdmrSpec {
            linewidth: self.linewidth,
            contrast: self.contrast,
            bias_field: self.bias_field,
            ..OdmrSpec::default()
        };
        let half = base.gamma * self.bias_field.abs() + base.hyperfine_splitting + 8.0 * self.linewidth;
        OdmrSpec {
            freq_grid: uniform_grid(ZERO_FIELD_SPLITTING - half, ZERO_FIELD_SPLITTING + half, self.grid_step),
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::TrojanScale,
            values: vec![8.0, 4.0, 2.0, 1.0],
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub reference: LogicDesign,
    pub test: LogicDesign,
    /// Layout, grid and image; `noise_sigma` and `drift` are filled from
    /// the `noise` settings by [`ExperimentConfig::setup`].
    pub setup: SimulationSetup,
    pub noise_sigma: Setting,
    /// Drift steps; `auto` is one noise sigma for the offset and half of one
    /// for the gradient.
    pub drift_offset_step: Setting,
    pub drift_gradient_step: Setting,
    pub protocol: Protocol,
    pub preprocess: PreprocessConfig,
    pub method: Method,
    pub components: usize,
    pub architecture: Architecture,
    pub training: TrainConfig,
    /// Share of images held out for scoring.
    pub test_fraction: f64,
    /// Share of the remaining images used for validation.
    pub val_fraction: f64,
    pub min_pts: usize,
    /// `auto` (written `knee`) picks eps from the latent points.
    pub eps: Setting,
    pub odmr: OdmrConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let base = BaseCircuit::counter(crate::logicsim::DEFAULT_COUNTER_WIDTH).expect("default base");
        let test = LogicDesign::with_trojan(base.clone(), TrojanSpec::new(TrojanKind::Counter, 8))
            .expect("default trojan");
        Self {
            reference: LogicDesign::trojan_free(base),
            test,
            setup: SimulationSetup::default(),
            noise_sigma: Setting::Auto,
            drift_offset_step: Setting::Auto,
            drift_gradient_step: Setting::Auto,
            protocol: Protocol::default(),
            preprocess: PreprocessConfig::default(),
            method: Method::Both,
            components: DEFAULT_COMPONENTS,
            architecture: Architecture::default(),
            training: TrainConfig {
                max_epochs: 300,
                ..TrainConfig::default()
            },
            test_fraction: 0.33,
            val_fraction: 0.2,
            min_pts: crate::cluster::DEFAULT_MIN_PTS,
            eps: Setting::Auto,
            odmr: OdmrConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            sweep: SweepConfig::default(),
        }
    }
}

const SECTION_KEYS: &[(&str, &[&str])] = &[
    (
        "layout.",
        &[
            "window_cycles",
            "pblock",
            "cell_pitch",
            "place_seed",
            "weight_register",
            "weight_lut",
            "weight_leakage",
            "rail_pitch",
            "pad_side",
            "rail_height",
        ],
    ),
    ("image.", &["height", "width", "pixel_pitch", "standoff", "origin"]),
    ("noise.", &["sigma", "drift_offset_step", "drift_gradient_step"]),
    ("protocol.", &["test_frames", "base_frames", "base_every"]),
    ("preprocess.", &["averaging_k", "highpass", "crop", "normalize"]),
    (
        "reduce.",
        &[
            "method",
            "components",
            "architecture",
            "optimizer",
            "learning_rate",
            "momentum",
            "batch_size",
            "max_epochs",
            "patience",
            "check_interval",
            "test_fraction",
            "val_fraction",
        ],
    ),
    ("cluster.", &["min_pts", "eps"]),
    ("odmr.", &["enabled", "bias_field", "linewidth", "contrast", "snr", "grid_step"]),
    ("sim.", &["seed"]),
    ("output.", &["dir"]),
    ("sweep.", &["axis", "values", "seeds"]),
];

impl ExperimentConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let doc = KvDocument::parse(text, source)?;
        for e in doc.entries() {
            let known_section = e.key.starts_with("reference.")
                || e.key.starts_with("test.")
                || SECTION_KEYS.iter().any(|(p, _)| e.key.starts_with(p));
            if !known_section {
                return Err(doc.error_at(e.line, 1, &format!("unknown key `{}`", e.key)));
            }
        }
        for (prefix, keys) in SECTION_KEYS {
            doc.check_known(prefix, keys)?;
        }
        let d = Self::default();

        let reference = if doc.entries().iter().any(|e| e.key.starts_with("reference.")) {
            design_from_kv(&doc, "reference.")?
        } else {
            d.reference.clone()
        };
        let test = if doc.entries().iter().any(|e| e.key.starts_with("test.")) {
            design_from_kv(&doc, "test.")?
        } else {
            d.test.clone()
        };

        let ds = &d.setup;
        let pblock = match doc.parse_list::<f64>("layout.pblock")? {
            None => ds.pblock,
            Some(v) if v.len() == 4 => Rect::new(v[0], v[1], v[2], v[3]),
            Some(_) => return Err(entry_err(&doc, "layout.pblock", "expected x0,y0,x1,y1")),
        };
        let pad_side = match doc.get("layout.pad_side") {
            None => ds.grid.pad_side,
            Some(e) => PadSide::parse(&e.value)
                .ok_or_else(|| doc.entry_error(e, "expected `left` or `right`"))?,
        };
        let grid = PowerGridSpec {
            rail_pitch: doc.parse_or("layout.rail_pitch", ds.grid.rail_pitch)?,
            pad_side,
            rail_height: doc.parse_or("layout.rail_height", ds.grid.rail_height)?,
        };
        let origin = match doc.parse_list::<f64>("image.origin")? {
            None => ds.image.origin,
            Some(v) if v.len() == 2 => [v[0], v[1]],
            Some(_) => return Err(entry_err(&doc, "image.origin", "expected x,y")),
        };
        let image = ImageSpec {
            height: doc.parse_or("image.height", ds.image.height)?,
            width: doc.parse_or("image.width", ds.image.width)?,
            pixel_pitch: doc.parse_or("image.pixel_pitch", ds.image.pixel_pitch)?,
            standoff: doc.parse_or("image.standoff", ds.image.standoff)?,
            origin,
            rail_z: grid.rail_height,
        };
        let setup = SimulationSetup {
            window_cycles: doc.parse_or("layout.window_cycles", ds.window_cycles)?,
            pblock,
            cell_pitch: doc.parse_or("layout.cell_pitch", ds.cell_pitch)?,
            place_seed: doc.parse_or("layout.place_seed", ds.place_seed)?,
            weights: CurrentWeights {
                register: doc.parse_or("layout.weight_register", ds.weights.register)?,
                lut: doc.parse_or("layout.weight_lut", ds.weights.lut)?,
                leakage: doc.parse_or("layout.weight_leakage", ds.weights.leakage)?,
            },
            grid,
            image,
            noise_sigma: None,
            drift: DriftModel::off(),
        };

        let setting = |key: &str| -> Result<Setting> {
            match doc.get(key) {
                None => Ok(Setting::Auto),
                Some(e) => Setting::parse(&e.value).map_err(|m| doc.entry_error(e, m)),
            }
        };

        let highpass = match doc.get("preprocess.highpass") {
            None => d.preprocess.highpass,
            Some(e) => match e.value.as_str() {
                "auto" => Highpass::Auto,
                "off" => Highpass::Off,
                v => Highpass::Sigma(v.parse().map_err(|err| {
                    doc.entry_error(e, format!("expected `auto`, `off` or a sigma in pixels: {err}"))
                })?),
            },
        };
        let crop = match doc.get("preprocess.crop") {
            None => d.preprocess.crop,
            Some(e) => parse_crop(&e.value).map_err(|m| doc.entry_error(e, m))?,
        };
        let preprocess = PreprocessConfig {
            averaging_k: doc.parse_or("preprocess.averaging_k", d.preprocess.averaging_k)?,
            highpass,
            crop,
            normalize: doc.parse_bool_or("preprocess.normalize", d.preprocess.normalize)?,
        };

        let method = match doc.get("reduce.method") {
            None => d.method,
            Some(e) => Method::parse(&e.value)
                .ok_or_else(|| doc.entry_error(e, "expected `pca`, `cnn` or `both`"))?,
        };
        let architecture = match doc.get("reduce.architecture") {
            None => d.architecture.clone(),
            Some(e) => Architecture::parse(&e.value).map_err(|err| doc.entry_error(e, err))?,
        };
        let optimizer = match doc.get("reduce.optimizer") {
            None => d.training.optimizer,
            Some(e) => Optimizer::parse(&e.value).ok_or_else(|| doc.entry_error(e, "expected `adam` or `momentum`"))?,
        };
        let training = TrainConfig {
            optimizer,
            learning_rate: doc.parse_or("reduce.learning_rate", d.training.learning_rate)?,
            momentum: doc.parse_or("reduce.momentum", d.training.momentum)?,
            batch_size: doc.parse_or("reduce.batch_size", d.training.batch_size)?,
            max_epochs: doc.parse_or("reduce.max_epochs", d.training.max_epochs)?,
            patience: doc.parse_or("reduce.patience", d.training.patience)?,
            check_interval: doc.parse_or("reduce.check_interval", d.training.check_interval)?,
            shuffle_seed: 0,
        };

        let odmr = OdmrConfig {
            enabled: doc.parse_bool_or("odmr.enabled", d.odmr.enabled)?,
            bias_field: doc.parse_or("odmr.bias_field", d.odmr.bias_field)?,
            linewidth: doc.parse_or("odmr.linewidth", d.odmr.linewidth)?,
            contrast: doc.parse_or("odmr.contrast", d.odmr.contrast)?,
            snr: doc.parse_or("odmr.snr", d.odmr.snr)?,
            grid_step: doc.parse_or("odmr.grid_step", d.odmr.grid_step)?,
        };

        let axis = match doc.get("sweep.axis") {
            None => d.sweep.axis,
            Some(e) => SweepAxis::parse(&e.value).ok_or_else(|| {
                doc.entry_error(e, "expected trojan_scale, frequency_divider, noise_sigma or standoff")
            })?,
        };
        let sweep = SweepConfig {
            axis,
            values: doc.parse_list("sweep.values")?.unwrap_or(d.sweep.values),
            seeds: doc.parse_list("sweep.seeds")?.unwrap_or(d.sweep.seeds),
        };

        let cfg = Self {
            reference,
            test,
            setup,
            noise_sigma: setting("noise.sigma")?,
            drift_offset_step: setting("noise.drift_offset_step")?,
            drift_gradient_step: setting("noise.drift_gradient_step")?,
            protocol: Protocol {
                test_frames: doc.parse_or("protocol.test_frames", d.protocol.test_frames)?,
                base_frames: doc.parse_or("protocol.base_frames", d.protocol.base_frames)?,
                base_every: doc.parse_or("protocol.base_every", d.protocol.base_every)?,
            },
            preprocess,
            method,
            components: doc.parse_or("reduce.components", d.components)?,
            architecture,
            training,
            test_fraction: doc.parse_or("reduce.test_fraction", d.test_fraction)?,
            val_fraction: doc.parse_or("reduce.val_fraction", d.val_fraction)?,
            min_pts: doc.parse_or("cluster.min_pts", d.min_pts)?,
            eps: match doc.get("cluster.eps") {
                Some(e) if e.value == "knee" => Setting::Auto,
                _ => setting("cluster.eps")?,
            },
            odmr,
            seed: doc.parse_or("sim.seed", d.seed)?,
            output_dir: doc.get("output.dir").map_or(d.output_dir, |e| PathBuf::from(&e.value)),
            sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.setup.image.validate()?;
        self.setup.grid.validate()?;
        self.protocol.validate()?;
        self.preprocess.validate()?;
        self.training.validate()?;
        if self.components == 0 {
            return Err(Error::Config("reduce.components must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("reduce.test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!("reduce.val_fraction must lie in [0, 1), got {}", self.val_fraction)));
        }
        if self.min_pts == 0 {
            return Err(Error::Config("cluster.min_pts must be at least 1".into()));
        }
        for (name, s) in [
            ("noise.sigma", self.noise_sigma),
            ("noise.drift_offset_step", self.drift_offset_step),
            ("noise.drift_gradient_step", self.drift_gradient_step),
        ] {
            if let Setting::Value(v) = s {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
                }
            }
        }
        if let Setting::Value(v) = self.eps {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("cluster.eps must be positive, got {v}")));
            }
        }
        if self.odmr.enabled {
            if !(self.odmr.snr > 0.0 && self.odmr.grid_step > 0.0 && self.odmr.linewidth > 0.0) {
                return Err(Error::Config("odmr snr, grid_step and linewidth must be positive".into()));
            }
            self.odmr.spec().validate()?;
        }
        Ok(())
    }

    /// Simulation setup with noise and drift resolved.
    pub fn setup(&self) -> Result<SimulationSetup> {
        let sigma = match self.noise_sigma {
            Setting::Value(v) => v,
            Setting::Auto => calibrate_noise(&self.setup.image, &self.setup.grid)?,
        };
        Ok(SimulationSetup {
            noise_sigma: Some(sigma),
            drift: DriftModel {
                offset_step: self.drift_offset_step.or(sigma),
                gradient_step: self.drift_gradient_step.or(0.5 * sigma),
            },
            ..self.setup.clone()
        })
    }

    /// Copy with every `auto` replaced by its value.
    pub fn resolved(&self) -> Result<Self> {
        let setup = self.setup()?;
        let mut out = self.clone();
        out.noise_sigma = Setting::Value(setup.noise_sigma.unwrap_or(0.0));
        out.drift_offset_step = Setting::Value(setup.drift.offset_step);
        out.drift_gradient_step = Setting::Value(setup.drift.gradient_step);
        if let Some(s) = self.preprocess.highpass.sigma_for(self.setup.image.height) {
            out.preprocess.highpass = Highpass::Sigma(s);
        }
        Ok(out)
    }

    /// Writes every key. Resolve first for a fully explicit record.
    pub fn to_text(&self) -> String {
        let mut w = KvWriter::new();
        w.comment("reference chip design");
        design_to_kv(&self.reference, "reference.", &mut w);
        w.comment("test chip design");
        design_to_kv(&self.test, "test.", &mut w);
        let s = &self.setup;
        w.put("layout.window_cycles", s.window_cycles)
            .put_list("layout.pblock", &[s.pblock.x0, s.pblock.y0, s.pblock.x1, s.pblock.y1])
            .put("layout.cell_pitch", s.cell_pitch)
            .put("layout.place_seed", s.place_seed)
            .put("layout.weight_register", s.weights.register)
            .put("layout.weight_lut", s.weights.lut)
            .put("layout.weight_leakage", s.weights.leakage)
            .put("layout.rail_pitch", s.grid.rail_pitch)
            .put("layout.pad_side", s.grid.pad_side.as_str())
            .put("layout.rail_height", s.grid.rail_height)
            .put("image.height", s.image.height)
            .put("image.width", s.image.width)
            .put("image.pixel_pitch", s.image.pixel_pitch)
            .put("image.standoff", s.image.standoff)
            .put_list("image.origin", &s.image.origin)
            .put("noise.sigma", self.noise_sigma)
            .put("noise.drift_offset_step", self.drift_offset_step)
            .put("noise.drift_gradient_step", self.drift_gradient_step)
            .put("protocol.test_frames", self.protocol.test_frames)
            .put("protocol.base_frames", self.protocol.base_frames)
            .put("protocol.base_every", self.protocol.base_every);
        let p = &self.preprocess;
        let highpass = match p.highpass {
            Highpass::Off => "off".to_string(),
            Highpass::Auto => "auto".to_string(),
            Highpass::Sigma(v) => v.to_string(),
        };
        w.put("preprocess.averaging_k", p.averaging_k)
            .put("preprocess.highpass", highpass)
            .put("preprocess.crop", format_crop(&p.crop))
            .put("preprocess.normalize", p.normalize)
            .put("reduce.method", self.method.as_str())
            .put("reduce.components", self.components)
            .put("reduce.architecture", &self.architecture)
            .put("reduce.optimizer", self.training.optimizer.as_str())
            .put("reduce.learning_rate", self.training.learning_rate)
            .put("reduce.momentum", self.training.momentum)
            .put("reduce.batch_size", self.training.batch_size)
            .put("reduce.max_epochs", self.training.max_epochs)
            .put("reduce.patience", self.training.patience)
            .put("reduce.check_interval", self.training.check_interval)
            .put("reduce.test_fraction", self.test_fraction)
            .put("reduce.val_fraction", self.val_fraction)
            .put("cluster.min_pts", self.min_pts)
            .put("cluster.eps", match self.eps {
                Setting::Auto => "knee".to_string(),
                Setting::Value(v) => v.to_string(),
            })
            .put("odmr.enabled", self.odmr.enabled)
            .put("odmr.bias_field", self.odmr.bias_field)
            .put("odmr.linewidth", self.odmr.linewidth)
            .put("odmr.contrast", self.odmr.contrast)
            .put("odmr.snr", self.odmr.snr)
            .put("odmr.grid_step", self.odmr.grid_step)
            .put("sim.seed", self.seed)
            .put("output.dir", self.output_dir.display())
            .put("sweep.axis", self.sweep.axis.as_str())
            .put_list("sweep.values", &self.sweep.values)
            .put_list("sweep.seeds", &self.sweep.seeds);
        w.finish()
    }

    /// Applies one sweep value.
    pub fn with_axis_value(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let whole = |v: f64| -> Result<u64> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(Error::Usage(format!("{} needs whole numbers, got {v}", axis.as_str())))
            }
        };
        match axis {
            SweepAxis::TrojanScale | SweepAxis::FrequencyDivider => {
                let Some(mut spec) = self.test.trojan.clone() else {
                    return Err(Error::Usage(format!(
                        "sweeping {} needs a trojan in the test design",
                        axis.as_str()
                    )));
                };
                if axis == SweepAxis::TrojanScale {
                    spec.scale = whole(value)? as usize;
                } else {
                    spec.frequency_divider = whole(value)? as u32;
                }
                out.test = LogicDesign::with_trojan(self.test.base.clone(), spec)?;
            }
            SweepAxis::NoiseSigma => out.noise_sigma = Setting::Value(value),
            SweepAxis::Standoff => out.setup.image.standoff = value,
        }
        out.validate()?;
        Ok(out)
    }
}

fn entry_err(doc: &KvDocument, key: &str, msg: &str) -> Error {
    match doc.get(key) {
        Some(e) => doc.entry_error(e, msg),
        None => Error::Config(format!("{key}: {msg}")),
    }
}

fn parse_crop(s: &str) -> std::result::Result<CropRect, String> {
    if s == "full" {
        return Ok(CropRect::full());
    }
    if let Some(f) = s.strip_prefix("bottom:") {
        let f: f64 = f.trim().parse().map_err(|e| format!("bad bottom fraction: {e}"))?;
        let c = CropRect::bottom(f);
        c.validate().map_err(|e| e.to_string())?;
        return Ok(c);
    }
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("expected `full`, `bottom:F` or top,left,height,width fractions: {e}"))?;
    if v.len() != 4 {
        return Err("expected four fractions top,left,height,width".into());
    }
    let c = CropRect {
        top: v[0],
        left: v[1],
        height: v[2],
        width: v[3],
    };
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn format_crop(c: &CropRect) -> String {
    format!("{},{},{},{}", c.top, c.left, c.height, c.width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = ExperimentConfig::parse("", "c").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert!(c.test.has_active_trojan());
        assert!(c.reference.is_trojan_free());
    }

    #[test]
    fn resolved_text_round_trips() {
        let c = ExperimentConfig::parse(
            "test.trojan.kind = comparator\ntest.trojan.scale = 2\nimage.standoff = 80\npreprocess.crop = bottom:0.5\nsim.seed = 9\n",
            "c",
        )
        .unwrap()
        .resolved()
        .unwrap();
        let text = c.to_text();
        assert!(!text.contains("auto"));
        let back = ExperimentConfig::parse(&text, "again").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn errors_carry_position() {
        let e = ExperimentConfig::parse("sim.seed = 1\nimage.height = tall\n", "cfg").unwrap_err();
        match e {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 16);
            }
            other => panic!("{other}"),
        }
        assert!(matches!(
            ExperimentConfig::parse("bogus.key = 1\n", "cfg"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("image.colour = 1\n", "cfg"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(ExperimentConfig::parse("reduce.method = svm\n", "cfg").is_err());
    }

    #[test]
    fn axis_values_apply() {
        let c = ExperimentConfig::default();
        assert_eq!(c.with_axis_value(SweepAxis::TrojanScale, 2.0).unwrap().test.trojan_scale(), 2);
        assert_eq!(
            c.with_axis_value(SweepAxis::FrequencyDivider, 4.0).unwrap().test.frequency_divider(),
            4
        );
        assert!(c.with_axis_value(SweepAxis::TrojanScale, 1.5).is_err());
        assert_eq!(c.with_axis_value(SweepAxis::Standoff, 80.0).unwrap().setup.image.standoff, 80.0);
        let mut tf = c.clone();
        tf.test = tf.reference.clone();
        assert!(matches!(tf.with_axis_value(SweepAxis::TrojanScale, 2.0), Err(Error::Usage(_))));
    }

    #[test]
    fn auto_noise_resolves_to_calibration() {
        let c = ExperimentConfig::default();
        let s = c.setup().unwrap();
        let sigma = calibrate_noise(&c.setup.image, &c.setup.grid).unwrap();
        assert_eq!(s.noise_sigma, Some(sigma));
        assert_eq!(s.drift.offset_step, sigma);
        assert_eq!(s.drift.gradient_step, 0.5 * sigma);
    }
}
