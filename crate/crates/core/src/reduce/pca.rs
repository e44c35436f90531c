use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fieldsynth::FieldImage;
use crate::scalar::Real;

pub const DEFAULT_COMPONENTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub shape: (usize, usize),
    pub mean: Vec<f64>,
    /// Orthonormal principal directions, strongest first. Each is signed so
    /// that its largest-magnitude entry is positive.
    pub components: Vec<Vec<f64>>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn explained_total(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }

    /// True when the kept components explain less than half the variance.
    pub fn low_variance(&self) -> bool {
        self.explained_total() < 0.5
    }

    fn check_shape<T: Real>(&self, image: &FieldImage<T>) -> Result<()> {
        if image.shape() != self.shape {
            return Err(Error::Shape(format!(
                "image is {:?}, model was fitted on {:?}",
                image.shape(),
                self.shape
            )));
        }
        Ok(())
    }

    pub fn transform<T: Real>(&self, image: &FieldImage<T>) -> Result<Vec<f64>> {
        self.check_shape(image)?;
        Ok(self
            .components
            .iter()
            .map(|c| {
                image
                    .data()
                    .iter()
                    .zip(&self.mean)
                    .zip(c)
                    .map(|((&x, m), v)| (x.to_f64_lossy() - m) * v)
                    .sum()
            })
            .collect())
    }

    /// `mean + sum coords[k] * component[k]`, flattened.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, comp) in coords.iter().zip(&self.components) {
            for (o, v) in out.iter_mut().zip(comp) {
                *o += c * v;
            }
        }
        out
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Thin-SVD principal components of the flattened images.
pub fn pca_fit<T: Real>(images: &[FieldImage<T>], n_components: usize) -> Result<PcaModel> {
    let n = images.len();
    if n_components == 0 || n < n_components + 1 {
        return Err(Error::Shape(format!(
            "{n} images cannot support {n_components} components (need at least {})",
            n_components + 1
        )));
    }
    let shape = images[0].shape();
    if let Some(bad) = images.iter().find(|i| i.shape() != shape) {
        return Err(Error::Shape(format!("image shapes differ: {shape:?} vs {:?}", bad.shape())));
    }
    let d = images[0].data().len();
    if d < n_components {
        return Err(Error::Shape(format!("{d} features cannot support {n_components} components")));
    }
    let mut mean = vec![0.0; d];
    for img in images {
        for (m, &x) in mean.iter_mut().zip(img.data()) {
            *m += x.to_f64_lossy();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |r, c| images[r].data()[c].to_f64_lossy() - mean[c]);
    let total: f64 = x.iter().map(|v| v * v).sum();
    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut components = Vec::with_capacity(n_components);
    let mut ratios = Vec::with_capacity(n_components);
    for &k in order.iter().take(n_components) {
        let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
        canonical_sign(&mut v);
        components.push(v);
        let s = svd.singular_values[k];
        ratios.push(if total > 0.0 { (s * s / total).min(1.0) } else { 0.0 });
    }
    let model = PcaModel {
        shape,
        mean,
        components,
        explained_variance_ratio: ratios,
    };
    if model.low_variance() {
        log::warn!(
            "first {} principal components explain only {:.1}% of the variance",
            n_components,
            100.0 * model.explained_total()
        );
    }
    Ok(model)
}
