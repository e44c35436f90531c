use super::dbscan::distance_matrix;
use crate::error::{Error, Result};

/// Each point's distance to its second nearest other point, ascending.
pub fn second_neighbor_curve<P: AsRef<[f64]>>(points: &[P]) -> Vec<f64> {
    let d = distance_matrix(points);
    let mut curve: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut others: Vec<f64> = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
            others.sort_by(f64::total_cmp);
            others[1]
        })
        .collect();
    curve.sort_by(f64::total_cmp);
    curve
}

/// Index of the sorted curve lying furthest below the chord joining its end
/// points; the last such index on ties, so a flat curve picks its end.
pub fn knee_index(curve: &[f64]) -> usize {
    let n = curve.len();
    if n < 2 {
        return n.saturating_sub(1);
    }
    let (y0, y1) = (curve[0], curve[n - 1]);
    let span = (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &y) in curve.iter().enumerate() {
        let gap = y0 + (y1 - y0) * i as f64 / span - y;
        if gap >= best.0 {
            best = (gap, i);
        }
    }
    best.1
}

/// DBSCAN radius at the knee of the second-nearest-neighbour distance curve.
/// Identical points give the smallest positive float, with a warning.
pub fn knee_eps<P: AsRef<[f64]>>(points: &[P]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::Shape(format!("knee selection needs at least 4 points, got {}", points.len())));
    }
    let curve = second_neighbor_curve(points);
    let eps = curve[knee_index(&curve)];
    if eps > 0.0 {
        Ok(eps)
    } else {
        log::warn!("knee distance is zero (coincident points); using the smallest positive eps");
        Ok(f64::MIN_POSITIVE)
    }
}
