use rayon::prelude::*;

use super::biot_savart::field_at;
use crate::error::{Error, Result};
use crate::layoutpower::WireSegment;
use crate::scalar::Real;

pub const CHANNELS: usize = 3;

/// Sensor pixel grid on the NV plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSpec {
    pub height: usize,
    pub width: usize,
    /// Micrometers between pixel centers.
    pub pixel_pitch: f64,
    /// NV plane height above the rail plane, micrometers.
    pub standoff: f64,
    /// Center of pixel (0, 0); row index grows along +y, column along +x.
    pub origin: [f64; 2],
    /// Height of the rail plane above the cell plane.
    pub rail_z: f64,
}

impl Default for ImageSpec {
    /// Desk-scale 96x96 grid at 24 um pitch.
    fn default() -> Self {
        Self {
            height: 96,
            width: 96,
            pixel_pitch: 24.0,
            standoff: 50.0,
            origin: [12.0, 12.0],
            rail_z: 5.0,
        }
    }
}

impl ImageSpec {
    /// The measured 600x600 grid at 6 um pitch.
    pub fn full_resolution() -> Self {
        Self {
            height: 600,
            width: 600,
            pixel_pitch: 6.0,
            origin: [3.0, 3.0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("image must have at least one pixel".into()));
        }
        if !(self.pixel_pitch > 0.0) {
            return Err(Error::Config(format!("pixel pitch must be positive, got {}", self.pixel_pitch)));
        }
        if !(self.standoff > 0.0) {
            return Err(Error::Config(format!("standoff must be positive, got {}", self.standoff)));
        }
        Ok(())
    }

    pub fn sensor_z(&self) -> f64 {
        self.rail_z + self.standoff
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + col as f64 * self.pixel_pitch,
            self.origin[1] + row as f64 * self.pixel_pitch,
        ]
    }

    /// Field of view extent in micrometers (x, y).
    pub fn extent(&self) -> [f64; 2] {
        [
            self.width as f64 * self.pixel_pitch,
            self.height as f64 * self.pixel_pitch,
        ]
    }
}

/// `height x width x 3` field image, row-major with the channel (Bx, By, Bz)
/// fastest. Values are microtesla.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldImage<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> FieldImage<T> {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![T::zero(); height * width * CHANNELS],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width * CHANNELS {
            return Err(Error::Shape(format!(
                "{} values for a {height}x{width}x3 image",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * CHANNELS + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[self.index(row, col, ch)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, v: T) {
        let i = self.index(row, col, ch);
        self.data[i] = v;
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "image shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn cast<U: Real>(&self) -> FieldImage<U> {
        FieldImage {
            height: self.height,
            width: self.width,
            data: crate::scalar::cast_slice(&self.data),
        }
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, ch: usize) -> Vec<T> {
        self.data.iter().skip(ch).step_by(CHANNELS).copied().collect()
    }

    /// Elementwise mean of equally shaped images.
    pub fn mean_of<'a, I>(images: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FieldImage<T>>,
    {
        let mut iter = images.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Shape("mean of zero images".into()))?;
        let mut acc = first.clone();
        let mut n = 1usize;
        for img in iter {
            acc.check_same_shape(img)?;
            for (a, &b) in acc.data.iter_mut().zip(&img.data) {
                *a += b;
            }
            n += 1;
        }
        let inv = T::one() / T::lit(n as f64);
        Ok(acc.scale(inv))
    }

    /// Euclidean norm over all pixels and channels.
    pub fn norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

/// Renders the superposed field of `segments` at every pixel center on the NV
/// plane.
pub fn render_field_image<T: Real>(
    segments: &[WireSegment<T>],
    spec: &ImageSpec,
) -> Result<FieldImage<T>> {
    spec.validate()?;
    render_at_height(segments, spec, spec.sensor_z())
}

/// Same as [`render_field_image`] on the plane `z` instead of the NV plane.
pub fn render_at_height<T: Real>(
    segments: &[WireSegment<T>],
    spec: &ImageSpec,
    z: f64,
) -> Result<FieldImage<T>> {
    let active: Vec<WireSegment<T>> = segments
        .iter()
        .copied()
        .filter(|s| s.current != T::zero())
        .collect();
    let w = spec.width;
    let rows: Vec<Vec<T>> = (0..spec.height)
        .into_par_iter()
        .map(|row| {
            let mut out = Vec::with_capacity(w * CHANNELS);
            for col in 0..w {
                let [x, y] = spec.pixel_center(row, col);
                let b = field_at(&active, [T::lit(x), T::lit(y), T::lit(z)])?;
                out.extend_from_slice(&b);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    FieldImage::from_vec(spec.height, w, rows.concat())
}
