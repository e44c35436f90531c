mod dbscan;
mod knee;
mod report;

pub use dbscan::{dbscan, euclidean, ClusterLabeling, ClusterParams, DEFAULT_MIN_PTS};
pub use knee::{knee_eps, knee_index, second_neighbor_curve};
pub use report::{
    accuracy_report, consolidate, format_separation, normalized_euclidean, separation_ratio,
    Consolidation, DetectionReport,
};

use crate::error::Result;

/// Knee-selected eps followed by DBSCAN.
pub fn cluster_latents<P: AsRef<[f64]>>(points: &[P], min_pts: usize) -> Result<(ClusterLabeling, f64)> {
    let eps = knee_eps(points)?;
    let labeling = dbscan(points, &ClusterParams::new(eps, min_pts)?)?;
    Ok((labeling, eps))
}
