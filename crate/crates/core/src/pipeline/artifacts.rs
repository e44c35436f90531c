//! Raster plots (portable graymap/pixmap) and small CSV writers.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fieldsynth::FieldImage;
use crate::scalar::Real;

pub const MAP_SIZE: usize = 512;

/// Binary P5 graymap.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::Shape(format!("graymap needs {} bytes, got {}", width * height, pixels.len())));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

/// Binary P6 pixmap.
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != 3 * width * height {
        return Err(Error::Shape(format!("pixmap needs {} bytes, got {}", 3 * width * height, rgb.len())));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    fs::write(path, out)?;
    Ok(())
}

/// Gray level of a cluster id; noise is light gray.
pub fn cluster_gray(label: Option<usize>, n_clusters: usize) -> u8 {
    match label {
        None => 190,
        Some(c) => {
            let span = 140.0 / n_clusters.max(1) as f64;
            (c as f64 * span).round() as u8
        }
    }
}

/// Scatter of the first two coordinates on a white square, one 5x5 mark
/// per point.
pub fn scatter_map(points: &[Vec<f64>], labels: &[Option<usize>], n_clusters: usize) -> Vec<u8> {
    let mut img = vec![255u8; MAP_SIZE * MAP_SIZE];
    if points.is_empty() {
        return img;
    }
    let coord = |p: &Vec<f64>, d: usize| p.get(d).copied().unwrap_or(0.0);
    let bounds = |d: usize| {
        let (lo, hi) = points
            .iter()
            .map(|p| coord(p, d))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
        (lo - pad, hi + pad)
    };
    let (x0, x1) = bounds(0);
    let (y0, y1) = bounds(1);
    let last = (MAP_SIZE - 1) as f64;
    // Noise first so cluster marks stay on top.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| labels[i].is_some());
    for i in order {
        let cx = ((coord(&points[i], 0) - x0) / (x1 - x0) * last).round() as i64;
        let cy = ((y1 - coord(&points[i], 1)) / (y1 - y0) * last).round() as i64;
        let g = cluster_gray(labels[i], n_clusters);
        for dy in -2..=2 {
            for dx in -2..=2 {
                let (x, y) = (cx + dx, cy + dy);
                if (0..MAP_SIZE as i64).contains(&x) && (0..MAP_SIZE as i64).contains(&y) {
                    img[y as usize * MAP_SIZE + x as usize] = g;
                }
            }
        }
    }
    img
}

/// Blue-white-red map symmetric about zero, scaled to the largest magnitude.
pub fn diverging_rgb(values: &[f64]) -> Vec<u8> {
    let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut out = Vec::with_capacity(3 * values.len());
    for &v in values {
        let t = if m > 0.0 { (v / m).clamp(-1.0, 1.0) } else { 0.0 };
        let fade = (255.0 * (1.0 - t.abs())).round() as u8;
        if t >= 0.0 {
            out.extend_from_slice(&[255, fade, fade]);
        } else {
            out.extend_from_slice(&[fade, fade, 255]);
        }
    }
    out
}

/// One channel of an image as a diverging pixmap.
pub fn write_field_ppm<T: Real>(path: &Path, image: &FieldImage<T>, channel: usize) -> Result<()> {
    let values: Vec<f64> = image.channel(channel).iter().map(|v| v.to_f64_lossy()).collect();
    write_ppm(path, image.width(), image.height(), &diverging_rgb(&values))
}

/// Line chart of several series over shared x positions, one gray level per
/// series, on a 512 x 256 canvas; y spans [0, 1].
pub fn trend_plot(series: &[Vec<f64>]) -> (usize, usize, Vec<u8>) {
    let (w, h) = (MAP_SIZE, MAP_SIZE / 2);
    let mut img = vec![255u8; w * h];
    let margin = 16.0;
    for x in 0..w {
        img[(h - 16) * w + x] = 200;
    }
    for (s, ys) in series.iter().enumerate() {
        let g = (s as f64 * 120.0 / series.len().max(1) as f64) as u8;
        let n = ys.len();
        let px = |i: usize| {
            if n > 1 {
                margin + i as f64 * (w as f64 - 2.0 * margin) / (n - 1) as f64
            } else {
                w as f64 / 2.0
            }
        };
        let py = |v: f64| margin + (1.0 - v.clamp(0.0, 1.0)) * (h as f64 - 2.0 * margin);
        let mut plot = |x: f64, y: f64, r: i64| {
            for dy in -r..=r {
                for dx in -r..=r {
                    let (xi, yi) = (x.round() as i64 + dx, y.round() as i64 + dy);
                    if (0..w as i64).contains(&xi) && (0..h as i64).contains(&yi) {
                        img[yi as usize * w + xi as usize] = g;
                    }
                }
            }
        };
        for i in 0..n {
            if !ys[i].is_finite() {
                continue;
            }
            plot(px(i), py(ys[i]), 3);
            if i + 1 < n && ys[i + 1].is_finite() {
                let steps = 200;
                for k in 0..=steps {
                    let t = k as f64 / steps as f64;
                    plot(px(i) + t * (px(i + 1) - px(i)), py(ys[i]) + t * (py(ys[i + 1]) - py(ys[i])), 0);
                }
            }
        }
    }
    (w, h, img)
}
