use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::image::{render_field_image, FieldImage, ImageSpec, CHANNELS};
use super::noise::{calibrate_noise, DriftModel, DriftState};
use crate::error::{Error, Result};
use crate::layoutpower::{
    activity_to_currents, place_design_with_pitch, solve_rail_currents, CurrentWeights,
    PowerGridSpec, Rect, WireSegment, DEFAULT_CELL_PITCH,
};
use crate::logicsim::{simulate_activity, LogicDesign, DEFAULT_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameRole {
    Test,
    /// Captured with all switching logic disabled.
    Base,
}

impl FrameRole {
    pub fn code(self) -> u32 {
        match self {
            FrameRole::Test => 0,
            FrameRole::Base => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(FrameRole::Test),
            1 => Some(FrameRole::Base),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: FieldImage<f32>,
    /// Acquisition order within the dataset.
    pub index: u32,
    pub role: FrameRole,
    /// Ground-truth chip identity, only for scoring.
    pub chip_id: u32,
}

/// Frame counts and interleaving of one capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Protocol {
    pub test_frames: usize,
    pub base_frames: usize,
    /// A base frame follows every `base_every` test frames.
    pub base_every: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            test_frames: 80,
            base_frames: 20,
            base_every: 4,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.test_frames == 0 || self.base_frames == 0 || self.base_every == 0 {
            return Err(Error::Config(format!("protocol counts must be at least 1: {self:?}")));
        }
        Ok(())
    }

    pub fn frames_per_config(&self) -> usize {
        self.test_frames + self.base_frames
    }

    /// Capture order: `base_every` test frames then a base frame, repeated;
    /// leftovers of either role go last.
    pub fn sequence(&self) -> Vec<FrameRole> {
        let (mut t, mut b) = (self.test_frames, self.base_frames);
        let mut out = Vec::with_capacity(t + b);
        while t > 0 || b > 0 {
            let run = t.min(self.base_every);
            out.extend(std::iter::repeat(FrameRole::Test).take(run));
            t -= run;
            if b > 0 && (run == self.base_every || t == 0) {
                out.push(FrameRole::Base);
                b -= 1;
            }
        }
        out
    }
}

/// Everything between a logic design and its noiseless field image.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSetup {
    pub window_cycles: u64,
    pub pblock: Rect,
    pub cell_pitch: f64,
    pub place_seed: u64,
    pub weights: CurrentWeights,
    pub grid: PowerGridSpec,
    pub image: ImageSpec,
    /// Per-pixel Gaussian noise, microtesla. `None` calibrates to the noise
    /// floor.
    pub noise_sigma: Option<f64>,
    pub drift: DriftModel,
}

impl Default for SimulationSetup {
    fn default() -> Self {
        Self {
            window_cycles: DEFAULT_WINDOW,
            pblock: default_pblock(),
            cell_pitch: DEFAULT_CELL_PITCH,
            place_seed: 1,
            weights: CurrentWeights::default(),
            grid: PowerGridSpec::default(),
            image: ImageSpec::default(),
            noise_sigma: None,
            drift: DriftModel::off(),
        }
    }
}

/// 900 x 900 um pblock in the lower part of the default field of view.
pub fn default_pblock() -> Rect {
    Rect::new(700.0, 1200.0, 1600.0, 2100.0)
}

impl SimulationSetup {
    pub fn resolved_noise_sigma(&self) -> Result<f64> {
        match self.noise_sigma {
            Some(s) if s >= 0.0 && s.is_finite() => Ok(s),
            Some(s) => Err(Error::Config(format!("noise sigma must be >= 0, got {s}"))),
            None => calibrate_noise(&self.image, &self.grid),
        }
    }

    /// Loaded rail segments of `design`.
    pub fn segments(&self, design: &LogicDesign) -> Result<Vec<WireSegment>> {
        let profile = simulate_activity(design, self.window_cycles)?;
        let placement =
            place_design_with_pitch(design, self.pblock, self.cell_pitch, self.place_seed)?;
        let cells = activity_to_currents(&profile, &self.weights)?;
        solve_rail_currents(&cells, &placement, &self.grid)
    }

    /// Noiseless DC-average field image of `design`.
    pub fn render_clean(&self, design: &LogicDesign) -> Result<FieldImage<f64>> {
        render_field_image(&self.segments(design)?, &self.image)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub frames: Vec<Frame>,
    pub spec: ImageSpec,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Extra `key = value` provenance lines written to the manifest.
    pub metadata: Vec<(String, String)>,
}

impl Dataset {
    pub fn chip_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.frames.iter().map(|f| f.chip_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Frames of one chip, in acquisition order.
    pub fn chip(&self, chip_id: u32) -> Dataset {
        Dataset {
            frames: self
                .frames
                .iter()
                .filter(|f| f.chip_id == chip_id)
                .cloned()
                .collect(),
            ..self.clone_header()
        }
    }

    pub fn clone_header(&self) -> Dataset {
        Dataset {
            frames: Vec::new(),
            spec: self.spec,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
            metadata: self.metadata.clone(),
        }
    }

    pub fn count(&self, role: FrameRole) -> usize {
        self.frames.iter().filter(|f| f.role == role).count()
    }
}

fn frame_rng(seed: u64, config: usize, frame: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((config as u64) << 32) | frame as u64);
    rng
}

/// Simulates each `(design, chip_id)` once and emits its capture: test frames
/// are clean image + drift + noise, base frames drift + noise. Every frame
/// draws from its own RNG stream keyed by `(seed, config, frame)`, so the
/// result does not depend on the worker count.
pub fn generate_dataset(
    configs: &[(LogicDesign, u32)],
    setup: &SimulationSetup,
    protocol: &Protocol,
    seed: u64,
) -> Result<Dataset> {
    protocol.validate()?;
    let sigma = setup.resolved_noise_sigma()?;
    let mut cleans = Vec::with_capacity(configs.len());
    for (design, chip_id) in configs {
        cleans.push((setup.render_clean(design)?, *chip_id));
    }
    capture_frames(&cleans, &setup.image, sigma, &setup.drift, protocol, seed)
}

/// Frame emission for already rendered clean images.
pub fn capture_frames(
    cleans: &[(FieldImage<f64>, u32)],
    spec: &ImageSpec,
    sigma: f64,
    drift_model: &DriftModel,
    protocol: &Protocol,
    seed: u64,
) -> Result<Dataset> {
    protocol.validate()?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let spec = *spec;
    let sequence = protocol.sequence();
    let mut frames = Vec::with_capacity(cleans.len() * sequence.len());

    for (ci, (clean, chip_id)) in cleans.iter().enumerate() {
        if clean.shape() != (spec.height, spec.width) {
            return Err(Error::Shape(format!(
                "clean image is {:?}, spec wants {}x{}",
                clean.shape(),
                spec.height,
                spec.width
            )));
        }
        let mut drift = DriftState::default();
        let mut jobs = Vec::with_capacity(sequence.len());
        for (fi, &role) in sequence.iter().enumerate() {
            let mut rng = frame_rng(seed, ci, fi);
            let mut inc = [0.0; 9];
            for v in &mut inc {
                *v = StandardNormal.sample(&mut rng);
            }
            drift.advance(drift_model, &inc);
            jobs.push((fi, role, drift, rng));
        }
        let base_index = frames.len();
        let rendered: Vec<Frame> = jobs
            .into_par_iter()
            .map(|(fi, role, drift, mut rng)| {
                let (h, w) = (spec.height, spec.width);
                let mut data = Vec::with_capacity(h * w * CHANNELS);
                for row in 0..h {
                    let v = if h > 1 { 2.0 * row as f64 / (h - 1) as f64 - 1.0 } else { 0.0 };
                    for col in 0..w {
                        let u = if w > 1 { 2.0 * col as f64 / (w - 1) as f64 - 1.0 } else { 0.0 };
                        for ch in 0..CHANNELS {
                            let signal = match role {
                                FrameRole::Test => clean.get(row, col, ch),
                                FrameRole::Base => 0.0,
                            };
                            let n: f64 = StandardNormal.sample(&mut rng);
                            data.push((signal + drift.at(u, v, ch) + sigma * n) as f32);
                        }
                    }
                }
                Frame {
                    image: FieldImage::from_vec(h, w, data).expect("frame shape"),
                    index: (base_index + fi) as u32,
                    role,
                    chip_id: *chip_id,
                }
            })
            .collect();
        frames.extend(rendered);
    }
    Ok(Dataset {
        frames,
        spec,
        noise_sigma: sigma,
        seed,
        metadata: Vec::new(),
    })
}
