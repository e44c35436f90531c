use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fieldsynth::{Dataset, FieldImage, FrameRole, CHANNELS};
use crate::scalar::Real;

/// Sub-rectangle as fractions of the image height and width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRect {
    pub top: f64,
    pub left: f64,
    pub height: f64,
    pub width: f64,
}

impl CropRect {
    pub fn full() -> Self {
        Self {
            top: 0.0,
            left: 0.0,
            height: 1.0,
            width: 1.0,
        }
    }

    /// The bottom `fraction` of the rows, all columns.
    pub fn bottom(fraction: f64) -> Self {
        Self {
            top: 1.0 - fraction,
            left: 0.0,
            height: fraction,
            width: 1.0,
        }
    }

    pub fn is_full(&self) -> bool {
        *self == Self::full()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.height > 0.0 && self.height <= 1.0 && self.width > 0.0 && self.width <= 1.0)
            || !ok(self.top)
            || !ok(self.left)
        {
            return Err(Error::Parameter(format!("crop fractions out of range: {self:?}")));
        }
        Ok(())
    }

    /// `(row0, rows)` for an axis of length `n`: `rows = round(fraction * n)`,
    /// shifted inward if it would overrun the edge.
    fn span(start: f64, fraction: f64, n: usize) -> (usize, usize) {
        let len = ((fraction * n as f64).round() as usize).min(n);
        let first = ((start * n as f64).round() as usize).min(n - len);
        (first, len)
    }

    /// `(row0, col0, rows, cols)` on an `h x w` image.
    pub fn pixels(&self, h: usize, w: usize) -> (usize, usize, usize, usize) {
        let (r0, rows) = Self::span(self.top, self.height, h);
        let (c0, cols) = Self::span(self.left, self.width, w);
        (r0, c0, rows, cols)
    }
}

/// Spatial high-pass setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Highpass {
    Off,
    /// 10 px at 600 rows, scaled with image height.
    Auto,
    Sigma(f64),
}

impl Highpass {
    pub fn sigma_for(&self, height: usize) -> Option<f64> {
        match *self {
            Highpass::Off => None,
            Highpass::Auto => Some(10.0 * height as f64 / 600.0),
            Highpass::Sigma(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub averaging_k: usize,
    pub highpass: Highpass,
    pub crop: CropRect,
    pub normalize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            averaging_k: 2,
            highpass: Highpass::Auto,
            crop: CropRect::bottom(0.58),
            normalize: true,
        }
    }
}

impl PreprocessConfig {
    /// Settings for large surrogate workloads: no averaging, high-pass or
    /// crop, normalization on.
    pub fn large_workload() -> Self {
        Self {
            averaging_k: 1,
            highpass: Highpass::Off,
            crop: CropRect::full(),
            normalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.averaging_k == 0 {
            return Err(Error::Parameter("averaging k must be at least 1".into()));
        }
        if let Highpass::Sigma(s) = self.highpass {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Parameter(format!("high-pass sigma must be positive, got {s}")));
            }
        }
        self.crop.validate()
    }
}

/// A base-corrected test image with its (scoring-only) chip label.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrected<T> {
    pub image: FieldImage<T>,
    pub chip_id: u32,
    pub index: u32,
}

/// Subtracts from every Test frame the nearest Base frame of the same chip in
/// acquisition order, ties going to the earlier Base. Output keeps dataset
/// order.
pub fn subtract_base<T: Real>(dataset: &Dataset) -> Result<Vec<Corrected<T>>> {
    let mut out = Vec::with_capacity(dataset.count(FrameRole::Test));
    for chip in dataset.chip_ids() {
        let frames: Vec<_> = dataset.frames.iter().filter(|f| f.chip_id == chip).collect();
        let bases: Vec<_> = frames.iter().filter(|f| f.role == FrameRole::Base).collect();
        if bases.is_empty() {
            return Err(Error::Protocol(format!("chip {chip} has no base frames")));
        }
        for f in frames.iter().filter(|f| f.role == FrameRole::Test) {
            let nearest = bases
                .iter()
                .min_by_key(|b| ((b.index as i64 - f.index as i64).abs(), b.index))
                .unwrap();
            let image = f.image.cast::<T>().sub(&nearest.image.cast::<T>())?;
            out.push(Corrected {
                image,
                chip_id: chip,
                index: f.index,
            });
        }
    }
    out.sort_by_key(|c| c.index);
    Ok(out)
}

/// Means of consecutive non-overlapping groups of `k`.
pub fn average_pairs<T: Real>(images: &[FieldImage<T>], k: usize) -> Result<Vec<FieldImage<T>>> {
    if k == 0 || images.len() % k != 0 {
        return Err(Error::Shape(format!("{} images cannot be grouped by {k}", images.len())));
    }
    if k == 1 {
        return Ok(images.to_vec());
    }
    images.chunks(k).map(FieldImage::mean_of).collect()
}

/// Normalized Gaussian taps `g[-r..=r]`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("high-pass sigma must be positive, got {sigma}")));
    }
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / s).collect())
}

fn blur_axis<T: Real>(src: &[T], h: usize, w: usize, k: &[T], along_rows: bool) -> Vec<T> {
    let r = (k.len() / 2) as i64;
    let mut dst = vec![T::zero(); src.len()];
    for row in 0..h {
        for col in 0..w {
            for ch in 0..CHANNELS {
                let mut acc = T::zero();
                for (t, &g) in k.iter().enumerate() {
                    let o = t as i64 - r;
                    let (rr, cc) = if along_rows {
                        ((row as i64 + o).clamp(0, h as i64 - 1) as usize, col)
                    } else {
                        (row, (col as i64 + o).clamp(0, w as i64 - 1) as usize)
                    };
                    acc += g * src[(rr * w + cc) * CHANNELS + ch];
                }
                dst[(row * w + col) * CHANNELS + ch] = acc;
            }
        }
    }
    dst
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_blur<T: Real>(image: &FieldImage<T>, sigma: f64) -> Result<FieldImage<T>> {
    let k: Vec<T> = gaussian_kernel(sigma)?.into_iter().map(T::lit).collect();
    let (h, w) = image.shape();
    let tmp = blur_axis(image.data(), h, w, &k, false);
    FieldImage::from_vec(h, w, blur_axis(&tmp, h, w, &k, true))
}

/// `image - blur(image)` per channel.
pub fn highpass<T: Real>(image: &FieldImage<T>, sigma: f64) -> Result<FieldImage<T>> {
    image.sub(&gaussian_blur(image, sigma)?)
}

pub fn crop_fov<T: Real>(image: &FieldImage<T>, crop: &CropRect) -> Result<FieldImage<T>> {
    crop.validate()?;
    let (h, w) = image.shape();
    let (r0, c0, rows, cols) = crop.pixels(h, w);
    if rows == 0 || cols == 0 {
        return Err(Error::Parameter(format!("crop {crop:?} of {h}x{w} is empty")));
    }
    let mut data = Vec::with_capacity(rows * cols * CHANNELS);
    for r in r0..r0 + rows {
        let s = image.index(r, c0, 0);
        data.extend_from_slice(&image.data()[s..s + cols * CHANNELS]);
    }
    FieldImage::from_vec(rows, cols, data)
}

/// Global per-channel standardization across the whole set.
pub fn normalize<T: Real>(images: &[FieldImage<T>]) -> Result<Vec<FieldImage<T>>> {
    if images.is_empty() {
        return Err(Error::Shape("cannot normalize an empty image set".into()));
    }
    let shape = images[0].shape();
    if let Some(bad) = images.iter().find(|i| i.shape() != shape) {
        return Err(Error::Shape(format!("image shapes differ: {shape:?} vs {:?}", bad.shape())));
    }
    let mut mean = [0.0f64; CHANNELS];
    let mut count = 0usize;
    for img in images {
        for px in img.data().chunks_exact(CHANNELS) {
            for c in 0..CHANNELS {
                mean[c] += px[c].to_f64_lossy();
            }
        }
        count += img.data().len() / CHANNELS;
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = [0.0f64; CHANNELS];
    for img in images {
        for px in img.data().chunks_exact(CHANNELS) {
            for c in 0..CHANNELS {
                let d = px[c].to_f64_lossy() - mean[c];
                var[c] += d * d;
            }
        }
    }
    let scale: [f64; CHANNELS] = std::array::from_fn(|c| {
        let sd = (var[c] / count as f64).sqrt();
        // relative floor so rounding residue of a constant channel counts as zero
        if sd > 1e-12 * mean[c].abs().max(f64::MIN_POSITIVE) {
            1.0 / sd
        } else {
            0.0
        }
    });
    Ok(images
        .iter()
        .map(|img| {
            let mut out = img.clone();
            for px in out.data_mut().chunks_exact_mut(CHANNELS) {
                for c in 0..CHANNELS {
                    px[c] = T::lit((px[c].to_f64_lossy() - mean[c]) * scale[c]);
                }
            }
            out
        })
        .collect())
}

/// Full chain in fixed order: base subtraction, averaging within each chip,
/// high-pass, crop, then normalization over all chips together. Output is in
/// acquisition order; labels are carried only for scoring.
pub fn preprocess<T: Real>(dataset: &Dataset, cfg: &PreprocessConfig) -> Result<Vec<Corrected<T>>> {
    cfg.validate()?;
    let corrected = subtract_base::<T>(dataset)?;
    let sigma = cfg.highpass.sigma_for(dataset.spec.height);
    let mut out = Vec::new();
    for chip in dataset.chip_ids() {
        let mine: Vec<&Corrected<T>> = corrected.iter().filter(|c| c.chip_id == chip).collect();
        let imgs: Vec<FieldImage<T>> = mine.iter().map(|c| c.image.clone()).collect();
        let avg = average_pairs(&imgs, cfg.averaging_k)?;
        let stage: Vec<Result<FieldImage<T>>> = avg
            .par_iter()
            .map(|img| {
                let filtered = match sigma {
                    Some(s) => highpass(img, s)?,
                    None => img.clone(),
                };
                crop_fov(&filtered, &cfg.crop)
            })
            .collect();
        for (g, img) in stage.into_iter().enumerate() {
            out.push(Corrected {
                image: img?,
                chip_id: chip,
                index: mine[g * cfg.averaging_k].index,
            });
        }
    }
    out.sort_by_key(|c| c.index);
    if cfg.normalize {
        let imgs: Vec<FieldImage<T>> = out.iter().map(|c| c.image.clone()).collect();
        for (c, img) in out.iter_mut().zip(normalize(&imgs)?) {
            c.image = img;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldsynth::{Frame, ImageSpec};

    fn constant(h: usize, w: usize, v: f64) -> FieldImage<f64> {
        FieldImage::from_vec(h, w, vec![v; h * w * CHANNELS]).unwrap()
    }

    fn frame(v: f32, index: u32, role: FrameRole, chip: u32) -> Frame {
        Frame {
            image: FieldImage::from_vec(2, 2, vec![v; 12]).unwrap(),
            index,
            role,
            chip_id: chip,
        }
    }

    fn dataset(frames: Vec<Frame>) -> Dataset {
        Dataset {
            frames,
            spec: ImageSpec {
                height: 2,
                width: 2,
                ..ImageSpec::default()
            },
            noise_sigma: 0.0,
            seed: 0,
            metadata: vec![],
        }
    }

    #[test]
    fn nearest_base_with_earlier_tie() {
        use FrameRole::*;
        let d = dataset(vec![
            frame(10.0, 0, Test, 0),
            frame(1.0, 1, Base, 0),
            frame(10.0, 2, Test, 0),
            frame(2.0, 3, Base, 0),
            frame(10.0, 4, Test, 0),
        ]);
        let c = subtract_base::<f64>(&d).unwrap();
        let firsts: Vec<f64> = c.iter().map(|c| c.image.get(0, 0, 0)).collect();
        // frame 2 is equidistant from both bases and takes the earlier one
        assert_eq!(firsts, vec![9.0, 9.0, 8.0]);
    }

    #[test]
    fn base_never_crosses_chips() {
        use FrameRole::*;
        let d = dataset(vec![frame(5.0, 0, Test, 0), frame(1.0, 1, Base, 1), frame(3.0, 2, Base, 0)]);
        let c = subtract_base::<f64>(&d).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].image.get(0, 0, 0), 2.0);
        let none = dataset(vec![frame(5.0, 0, Test, 0)]);
        assert!(matches!(subtract_base::<f64>(&none), Err(Error::Protocol(_))));
    }

    #[test]
    fn averaging() {
        let imgs = vec![constant(2, 2, 1.0), constant(2, 2, 3.0)];
        assert_eq!(average_pairs(&imgs, 2).unwrap(), vec![constant(2, 2, 2.0)]);
        assert_eq!(average_pairs(&imgs, 1).unwrap(), imgs);
        assert!(matches!(average_pairs(&imgs[..1], 2), Err(Error::Shape(_))));
        let many: Vec<_> = (0..80).map(|i| constant(1, 1, i as f64)).collect();
        assert_eq!(average_pairs(&many, 2).unwrap().len(), 40);
    }

    #[test]
    fn highpass_constant_is_zero() {
        let out = highpass(&constant(9, 7, 4.2), 1.5).unwrap();
        assert!(out.max_abs() < 1e-12);
        assert!(matches!(highpass(&constant(3, 3, 1.0), 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn highpass_impulse_matches_direct_convolution() {
        let (h, w, sigma) = (21, 23, 1.3);
        let mut img = FieldImage::<f64>::zeros(h, w);
        img.set(10, 11, 1, 1.0);
        let out = highpass(&img, sigma).unwrap();
        // direct 2-D kernel, no edge effects this far from the border
        let r = (3.0f64 * sigma).ceil() as i64;
        let g = |d: i64| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
        let z: f64 = (-r..=r).map(g).sum();
        for row in 0..h as i64 {
            for col in 0..w as i64 {
                let (dr, dc) = (row - 10, col - 11);
                let k = if dr.abs() <= r && dc.abs() <= r { g(dr) * g(dc) / (z * z) } else { 0.0 };
                let want = if dr == 0 && dc == 0 { 1.0 } else { 0.0 } - k;
                let got = out.get(row as usize, col as usize, 1);
                assert!((got - want).abs() < 1e-14, "({row},{col}) {got} vs {want}");
                assert_eq!(out.get(row as usize, col as usize, 0), 0.0);
            }
        }
    }

    #[test]
    fn checkerboard_passes_at_nyquist() {
        for sigma in [2.0, 3.5] {
            let (h, w) = (40, 40);
            let mut img = FieldImage::<f64>::zeros(h, w);
            for r in 0..h {
                for c in 0..w {
                    img.set(r, c, 0, if (r + c) % 2 == 0 { 1.0 } else { -1.0 });
                }
            }
            let out = highpass(&img, sigma).unwrap();
            let k = gaussian_kernel(sigma).unwrap();
            let rad = k.len() / 2;
            let resp1: f64 = k.iter().enumerate().map(|(i, g)| if (i + rad) % 2 == 0 { *g } else { -*g }).sum();
            let gain = 1.0 - resp1 * resp1;
            for r in rad..h - rad {
                for c in rad..w - rad {
                    let ratio = out.get(r, c, 0) / img.get(r, c, 0);
                    assert!(ratio > 0.97);
                    assert!((ratio - gain).abs() < 0.01 * gain);
                }
            }
        }
    }

    #[test]
    fn crop_sizes() {
        let img = FieldImage::<f64>::zeros(600, 600);
        assert_eq!(crop_fov(&img, &CropRect::bottom(0.58)).unwrap().shape(), (348, 600));
        let small = FieldImage::<f64>::zeros(96, 96);
        assert_eq!(crop_fov(&small, &CropRect::bottom(0.58)).unwrap().shape(), (56, 96));
        assert_eq!(CropRect::bottom(0.58).pixels(96, 96), (40, 0, 56, 96));
        let mut tagged = FieldImage::<f64>::zeros(4, 3);
        tagged.set(3, 2, 2, 7.0);
        assert_eq!(crop_fov(&tagged, &CropRect::full()).unwrap(), tagged);
        let bottom = crop_fov(&tagged, &CropRect::bottom(0.5)).unwrap();
        assert_eq!(bottom.get(1, 2, 2), 7.0);
        assert!(crop_fov(&small, &CropRect::bottom(0.001)).is_err());
    }

    #[test]
    fn normalization_rules() {
        let a = FieldImage::<f64>::from_vec(1, 2, vec![1.0, 5.0, 2.0, 3.0, 5.0, 2.0]).unwrap();
        let b = FieldImage::from_vec(1, 2, vec![-1.0, 5.0, 4.0, 0.0, 5.0, 8.0]).unwrap();
        let n = normalize(&[a.clone(), b.clone()]).unwrap();
        assert!(n.iter().all(|i| (0..2).all(|c| i.get(0, c, 1) == 0.0)));
        let again = normalize(&n).unwrap();
        for (x, y) in n.iter().zip(&again) {
            for (p, q) in x.data().iter().zip(y.data()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        let scaled = normalize(&[a.scale(10.0), b.scale(10.0)]).unwrap();
        for (x, y) in n.iter().zip(&scaled) {
            for (p, q) in x.data().iter().zip(y.data()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        assert!(normalize::<f64>(&[]).is_err());
    }

    #[test]
    fn highpass_before_crop_differs() {
        let mut img = FieldImage::<f64>::zeros(20, 10);
        for r in 0..20 {
            for c in 0..10 {
                img.set(r, c, 0, (r * r) as f64 * 0.1 + c as f64);
            }
        }
        let crop = CropRect::bottom(0.5);
        let a = crop_fov(&highpass(&img, 2.0).unwrap(), &crop).unwrap();
        let b = highpass(&crop_fov(&img, &crop).unwrap(), 2.0).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() > 1e-3);
    }
}
