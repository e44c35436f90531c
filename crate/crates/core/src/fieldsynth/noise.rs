use super::biot_savart::biot_savart_segment;
use super::image::ImageSpec;
use crate::error::Result;
use crate::layoutpower::{PowerGridSpec, WireSegment};

/// Current whose line field sets the default per-pixel noise level, microamps.
pub const NOISE_FLOOR_CURRENT: f64 = 0.1;

/// Noise sigma (microtesla) equal to the peak |B| on the NV plane of a rail
/// segment carrying `current` across the whole field of view, centered under
/// the middle pixel row.
pub fn calibrate_noise_for(spec: &ImageSpec, grid: &PowerGridSpec, current: f64) -> Result<f64> {
    spec.validate()?;
    grid.validate()?;
    let y = spec.pixel_center(spec.height / 2, 0)[1];
    let x0 = spec.origin[0] - 0.5 * spec.pixel_pitch;
    let x1 = x0 + spec.extent()[0];
    let seg = WireSegment::new([x0, y, grid.rail_height], [x1, y, grid.rail_height], current);
    let z = grid.rail_height + spec.standoff;
    let mut peak: f64 = 0.0;
    for row in 0..spec.height {
        for col in 0..spec.width {
            let [px, py] = spec.pixel_center(row, col);
            let b = biot_savart_segment(&seg, [px, py, z])?;
            peak = peak.max((b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt());
        }
    }
    Ok(peak)
}

/// [`calibrate_noise_for`] at the 0.1 uA noise floor.
pub fn calibrate_noise(spec: &ImageSpec, grid: &PowerGridSpec) -> Result<f64> {
    calibrate_noise_for(spec, grid, NOISE_FLOOR_CURRENT)
}

/// Per-frame environmental drift: a random-walk uniform offset and a
/// random-walk linear gradient across the image, independently per channel.
/// Steps are Gaussian standard deviations in microtesla; the gradient step is
/// the field change from image center to edge.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftModel {
    pub offset_step: f64,
    pub gradient_step: f64,
}

impl DriftModel {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn is_off(&self) -> bool {
        self.offset_step == 0.0 && self.gradient_step == 0.0
    }
}

/// Accumulated drift: per channel offset, x-gradient, y-gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftState {
    pub offset: [f64; 3],
    pub grad_x: [f64; 3],
    pub grad_y: [f64; 3],
}

impl DriftState {
    pub(crate) fn advance(&mut self, model: &DriftModel, increments: &[f64; 9]) {
        for c in 0..3 {
            self.offset[c] += model.offset_step * increments[c];
            self.grad_x[c] += model.gradient_step * increments[3 + c];
            self.grad_y[c] += model.gradient_step * increments[6 + c];
        }
    }

    /// Drift value at a pixel; `u`, `v` run from -1 to 1 across the image.
    #[inline]
    pub fn at(&self, u: f64, v: f64, ch: usize) -> f64 {
        self.offset[ch] + self.grad_x[ch] * u + self.grad_y[ch] * v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn farther_sensor_lower_sigma() {
        let g = PowerGridSpec::default();
        let near = calibrate_noise(&ImageSpec::default(), &g).unwrap();
        let far = calibrate_noise(
            &ImageSpec {
                standoff: 100.0,
                ..ImageSpec::default()
            },
            &g,
        )
        .unwrap();
        assert!(far < near);
    }

    #[test]
    fn linear_in_current() {
        let (s, g) = (ImageSpec::default(), PowerGridSpec::default());
        let a = calibrate_noise_for(&s, &g, 0.1).unwrap();
        let b = calibrate_noise_for(&s, &g, 0.01).unwrap();
        assert!((a - 10.0 * b).abs() <= 1e-12 * a);
    }

    #[test]
    fn default_sigma_matches_direct_evaluation() {
        // Default grid: 96 px at 24 um, row 48 center y = 12 + 48*24 = 1164,
        // wire spans x in [0, 2304]; the pixel at x = 1164 sits 50 um above.
        let s = ImageSpec::default();
        let sigma = calibrate_noise(&s, &PowerGridSpec::default()).unwrap();
        let (a, b, h) = (1164.0_f64, 2304.0_f64 - 1164.0, 50.0_f64);
        // |B| = k I / h * (cos t1 + cos t2) for a point above the wire
        let direct = 0.1 * 0.1 / h * (a / (a * a + h * h).sqrt() + b / (b * b + h * h).sqrt());
        assert!((sigma - direct).abs() < 1e-12 * direct, "{sigma} vs {direct}");
        assert!((sigma - 3.99e-4).abs() < 1e-5);
    }
}
