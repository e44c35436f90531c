//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

use qdm_trojan::fieldsynth::FieldImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]).powi(2);
    }
    s.sqrt()
}

/// Relabels clusters by first appearance.
pub fn canonicalize(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut seen: Vec<usize> = Vec::new();
    labels
        .iter()
        .map(|l| {
            l.map(|c| match seen.iter().position(|&s| s == c) {
                Some(i) => i,
                None => {
                    seen.push(c);
                    seen.len() - 1
                }
            })
        })
        .collect()
}

/// DBSCAN straight from the definitions: eps-neighborhoods, core points,
/// density-connected components of the core graph by transitive closure,
/// border points attached to the nearest core in reach.
pub fn brute_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| dist(&points[i], &points[j]) <= eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    // reach[i][j]: cores i, j connected through a chain of cores
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = core[i] && core[j] && near(i, j);
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    // component id = lowest core index in the component
    let comp: Vec<Option<usize>> = (0..n)
        .map(|i| if core[i] { (0..n).find(|&j| reach[i][j]) } else { None })
        .collect();
    let mut labels = vec![None; n];
    for i in 0..n {
        if core[i] {
            labels[i] = comp[i];
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if core[j] && near(i, j) {
                let cand = (dist(&points[i], &points[j]), comp[j].unwrap());
                best = match best {
                    None => Some(cand),
                    Some(b) if cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1) => Some(cand),
                    keep => keep,
                };
            }
        }
        labels[i] = best.map(|b| b.1);
    }
    canonicalize(&labels)
}

/// A few Gaussian blobs in `dim` dimensions plus scattered outliers.
pub fn blob_points(r: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let k = r.gen_range(1..=3);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| r.gen_range(-5.0..5.0)).collect()).collect();
    (0..n)
        .map(|_| {
            if r.gen_bool(0.15) {
                (0..dim).map(|_| r.gen_range(-8.0..8.0)).collect()
            } else {
                let c = &centers[r.gen_range(0..k)];
                c.iter().map(|&v| v + r.gen_range(-1.0..1.0) * r.gen_range(0.2..1.0)).collect()
            }
        })
        .collect()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (descending) and the matching unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        v[i][i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// PCA through the eigenvectors of the centered Gram matrix (samples x
/// samples). Returns `k` unit directions in feature space with the largest
/// entry positive, and explained-variance ratios.
pub fn pca_oracle(rows: &[Vec<f64>], k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(a, b)| a - b).collect()).collect();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (0..d).map(|t| x[i][t] * x[j][t]).sum()).collect())
        .collect();
    let (values, vectors) = jacobi_eigen(gram);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let mut comps = Vec::new();
    let mut ratios = Vec::new();
    for c in 0..k {
        let lam = values[c].max(0.0);
        ratios.push(if total > 0.0 { lam / total } else { 0.0 });
        let mut dir: Vec<f64> = (0..d).map(|t| (0..n).map(|i| x[i][t] * vectors[c][i]).sum()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            dir.iter_mut().for_each(|v| *v /= norm);
        }
        let big = dir.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if big < 0.0 {
            dir.iter_mut().for_each(|v| *v = -*v);
        }
        comps.push(dir);
    }
    (comps, ratios)
}

/// Comparator block read off its pseudocode.
pub fn oracle_comparator(inputs: [bool; 4], enable: bool) -> bool {
    let word: String = inputs.iter().map(|&b| if b { '1' } else { '0' }).collect();
    enable && word == "1111"
}

/// Shift-register block, one rising edge. Bits are kept as a 4-element
/// array, index 0 receiving `input`.
pub fn oracle_shiftreg(reg: [bool; 4], input: bool, reset: bool, enable: bool) -> ([bool; 4], bool) {
    let next = if reset || !enable { [false; 4] } else { [input, reg[0], reg[1], reg[2]] };
    (next, next.iter().all(|&b| b))
}

/// Counter block, one rising edge; the count is a plain integer taken mod 16.
pub fn oracle_counter(count: u32, input: bool, reset: bool, enable: bool) -> (u32, bool) {
    let next = if reset || !enable {
        0
    } else if input {
        (count + 1) % 16
    } else {
        count
    };
    (next, next == 15)
}

/// Images whose pixels are a few latent factors with well separated
/// scales plus a little noise, so the leading eigenvalues are distinct.
pub fn factor_images(seed: u64, n: usize, h: usize, w: usize) -> Vec<FieldImage<f64>> {
    let mut r = rng(seed);
    let d = h * w * 3;
    let dirs: Vec<Vec<f64>> = (0..5).map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let offset: Vec<f64> = (0..d).map(|_| r.gen_range(-3.0..3.0)).collect();
    (0..n)
        .map(|_| {
            let a: Vec<f64> = (0..5).map(|k| r.gen_range(-1.0..1.0) * 4f64.powi(-(k as i32))).collect();
            let data = (0..d)
                .map(|p| offset[p] + (0..5).map(|k| a[k] * dirs[k][p]).sum::<f64>() + 1e-3 * r.gen_range(-1.0..1.0))
                .collect();
            FieldImage::from_vec(h, w, data).unwrap()
        })
        .collect()
}
