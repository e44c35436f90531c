use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Field-to-frequency slope, MHz per microtesla (28 MHz/mT).
pub const NV_GAMMA: f64 = 0.028;
/// Ground-state zero-field splitting, MHz.
pub const ZERO_FIELD_SPLITTING: f64 = 2870.0;
pub const HYPERFINE_SPLITTING: f64 = 3.05;

/// Single-axis NV resonance model. Frequencies are in MHz, fields in
/// microtesla.
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrSpec {
    pub zero_field_splitting: f64,
    pub gamma: f64,
    pub nv_axis: [f64; 3],
    /// Full width at half maximum of each sub-dip.
    pub linewidth: f64,
    /// Depth of each sub-dip.
    pub contrast: f64,
    pub hyperfine_splitting: f64,
    /// Static field along the axis added to every pixel, separating the pair.
    pub bias_field: f64,
    pub freq_grid: Vec<f64>,
}

impl Default for OdmrSpec {
    fn default() -> Self {
        Self {
            zero_field_splitting: ZERO_FIELD_SPLITTING,
            gamma: NV_GAMMA,
            nv_axis: [0.0, 0.0, 1.0],
            linewidth: 1.0,
            contrast: 0.02,
            hyperfine_splitting: HYPERFINE_SPLITTING,
            bias_field: 0.0,
            freq_grid: uniform_grid(ZERO_FIELD_SPLITTING - 20.0, ZERO_FIELD_SPLITTING + 20.0, 0.02),
        }
    }
}

/// `lo, lo + step, ...` up to and including `hi` (within half a step).
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 0.5).floor() as usize + 1;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

impl OdmrSpec {
    /// Grid of `step` spacing spanning `D +- half_span`.
    pub fn with_grid(mut self, half_span: f64, step: f64) -> Self {
        let d = self.zero_field_splitting;
        self.freq_grid = uniform_grid(d - half_span, d + half_span, step);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth > 0.0) {
            return Err(Error::Config(format!("linewidth must be positive, got {}", self.linewidth)));
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(Error::Config(format!("contrast must lie in (0, 1), got {}", self.contrast)));
        }
        if !(self.gamma > 0.0) || self.hyperfine_splitting < 0.0 {
            return Err(Error::Config("gamma must be positive and hyperfine splitting >= 0".into()));
        }
        let n: f64 = self.nv_axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Config("nv axis must be a nonzero vector".into()));
        }
        if self.freq_grid.len() < 8 || self.freq_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("frequency grid must be strictly increasing with at least 8 samples".into()));
        }
        Ok(())
    }

    pub fn unit_axis(&self) -> [f64; 3] {
        let n: f64 = self.nv_axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        self.nv_axis.map(|a| a / n)
    }

    /// Field projection on the NV axis, excluding the bias.
    pub fn project(&self, b: [f64; 3]) -> f64 {
        let u = self.unit_axis();
        b[0] * u[0] + b[1] * u[1] + b[2] * u[2]
    }

    /// `(f_minus, f_plus)` for a projected field.
    pub fn resonances(&self, b_parallel: f64) -> (f64, f64) {
        let s = self.gamma * (b_parallel + self.bias_field);
        let (a, b) = (self.zero_field_splitting - s, self.zero_field_splitting + s);
        (a.min(b), a.max(b))
    }

    /// Noise sigma giving `snr` = contrast / sigma.
    pub fn noise_for_snr(&self, snr: f64) -> f64 {
        self.contrast / snr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "frequency_mhz,contrast")?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            writeln!(out, "{f:.6},{v:.9}")?;
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn lorentz(f: f64, center: f64, fwhm: f64) -> f64 {
    let u = 2.0 * (f - center) / fwhm;
    1.0 / (1.0 + u * u)
}

/// Noiseless pair-of-resonances model, each resonance split into two
/// hyperfine sub-dips.
pub fn dip_model(f: f64, centers: [f64; 2], widths: [f64; 2], depths: [f64; 2], hyperfine: f64) -> f64 {
    let h = 0.5 * hyperfine;
    let mut y = 1.0;
    for s in 0..2 {
        y -= depths[s] * (lorentz(f, centers[s] - h, widths[s]) + lorentz(f, centers[s] + h, widths[s]));
    }
    y
}

/// Fluorescence spectrum of a pixel seeing field `b`, with optional Gaussian
/// read noise. Values are clamped into `(0, 1]`.
pub fn synthesize_odmr(b: [f64; 3], spec: &OdmrSpec, noise_sigma: f64, seed: u64) -> Result<Spectrum> {
    spec.validate()?;
    let (fm, fp) = spec.resonances(spec.project(b));
    let h = 0.5 * spec.hyperfine_splitting;
    let (lo, hi) = (spec.freq_grid[0], *spec.freq_grid.last().unwrap());
    if fm - h < lo || fp + h > hi {
        return Err(Error::Range(format!(
            "resonances {fm:.4}..{fp:.4} MHz fall outside the grid {lo:.4}..{hi:.4} MHz"
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let w = [spec.linewidth; 2];
    let c = [spec.contrast; 2];
    let mut values: Vec<f64> = spec
        .freq_grid
        .iter()
        .map(|&f| dip_model(f, [fm, fp], w, c, spec.hyperfine_splitting))
        .collect();
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    for v in &mut values {
        *v = v.clamp(f64::MIN_POSITIVE, 1.0);
    }
    Ok(Spectrum {
        freqs: spec.freq_grid.clone(),
        values,
    })
}

/// `(B_parallel, common_mode_shift)`; the field includes any bias.
pub fn extract_field(f_minus: f64, f_plus: f64, spec: &OdmrSpec) -> Result<(f64, f64)> {
    if f_plus < f_minus {
        return Err(Error::Ordering(format!("f_plus {f_plus} is below f_minus {f_minus}")));
    }
    Ok((
        (f_plus - f_minus) / (2.0 * spec.gamma),
        0.5 * (f_plus + f_minus) - spec.zero_field_splitting,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_dips_at_d() {
        let spec = OdmrSpec::default();
        let s = synthesize_odmr([0.0; 3], &spec, 0.0, 0).unwrap();
        let i = s
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((s.freqs[i] - (2870.0 - 1.525)).abs() < 0.03 || (s.freqs[i] - (2870.0 + 1.525)).abs() < 0.03);
        let depth_at_d = 1.0 - s.values[1000];
        assert!((s.freqs[1000] - 2870.0).abs() < 1e-9);
        assert!(depth_at_d < 1.0 - s.values[i]);
    }

    #[test]
    fn perpendicular_field_is_invisible() {
        let spec = OdmrSpec::default();
        let a = synthesize_odmr([0.0; 3], &spec, 0.0, 0).unwrap();
        let b = synthesize_odmr([300.0, -200.0, 0.0], &spec, 0.0, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sign_flip_symmetric() {
        let spec = OdmrSpec::default();
        let a = synthesize_odmr([10.0, 0.0, 250.0], &spec, 0.0, 0).unwrap();
        let b = synthesize_odmr([-10.0, 0.0, -250.0], &spec, 0.0, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_grid_rejected() {
        let spec = OdmrSpec::default();
        assert!(matches!(synthesize_odmr([0.0, 0.0, 1e4], &spec, 0.0, 0), Err(Error::Range(_))));
    }

    #[test]
    fn extract_inverse_and_common_mode() {
        let spec = OdmrSpec::default();
        let (fm, fp) = (2870.0 - 0.028 * 120.0, 2870.0 + 0.028 * 120.0);
        let (b, s) = extract_field(fm, fp, &spec).unwrap();
        assert!((b - 120.0).abs() < 1e-9 && s.abs() < 1e-9);
        let (b2, s2) = extract_field(fm + 0.4, fp + 0.4, &spec).unwrap();
        assert!((b2 - b).abs() < 1e-9 && (s2 - 0.4).abs() < 1e-9);
        assert!(matches!(extract_field(fp, fm, &spec), Err(Error::Ordering(_))));
    }

    #[test]
    fn noise_is_seeded() {
        let spec = OdmrSpec::default();
        let a = synthesize_odmr([0.0, 0.0, 100.0], &spec, 1e-3, 5).unwrap();
        let b = synthesize_odmr([0.0, 0.0, 100.0], &spec, 1e-3, 5).unwrap();
        let c = synthesize_odmr([0.0, 0.0, 100.0], &spec, 1e-3, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.values.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn csv_dump() {
        let s = Spectrum {
            freqs: vec![1.0, 2.0],
            values: vec![1.0, 0.5],
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "frequency_mhz,contrast\n1.000000,1.000000000\n2.000000,0.500000000\n");
    }
}
