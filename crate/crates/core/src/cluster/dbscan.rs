use crate::error::{Error, Result};

pub const DEFAULT_MIN_PTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl ClusterParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        let p = Self { eps, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || self.min_pts == 0 {
            return Err(Error::Parameter(format!(
                "need eps > 0 and min_pts >= 1, got eps {} min_pts {}",
                self.eps, self.min_pts
            )));
        }
        Ok(())
    }
}

/// Cluster id per point, `None` for noise. Ids are contiguous from 0 in order
/// of each cluster's lowest-index core point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
}

impl ClusterLabeling {
    pub fn point_count(&self) -> usize {
        self.labels.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == Some(cluster)).collect()
    }

    /// Relabels clusters in order of their smallest member index.
    pub fn canonical(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.n_clusters];
        let mut next = 0;
        self.labels
            .iter()
            .map(|l| {
                l.map(|c| {
                    *map[c].get_or_insert_with(|| {
                        next += 1;
                        next - 1
                    })
                })
            })
            .collect()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn distance_matrix<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(points[i].as_ref(), points[j].as_ref());
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Density-based clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps` inclusive; cores within `eps` of each
/// other share a cluster. A non-core point within `eps` of some core joins
/// the cluster of its nearest such core (lower id on exact ties), otherwise
/// it is noise.
pub fn dbscan<P: AsRef<[f64]>>(points: &[P], params: &ClusterParams) -> Result<ClusterLabeling> {
    params.validate()?;
    let n = points.len();
    let d = distance_matrix(points);
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| d[i][j] <= params.eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut n_clusters = 0;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        let id = n_clusters;
        n_clusters += 1;
        labels[start] = Some(id);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if core[q] && labels[q].is_none() {
                    labels[q] = Some(id);
                    queue.push_back(q);
                }
            }
        }
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        labels[i] = neighbors[i]
            .iter()
            .filter(|&&j| core[j])
            .map(|&j| (d[i][j], labels[j].unwrap()))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, c)| c);
    }
    Ok(ClusterLabeling { labels, n_clusters })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blobs() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push(vec![i as f64 * 0.1, 0.0, 0.0, 0.0]);
            pts.push(vec![100.0 + i as f64 * 0.1, 0.0, 0.0, 0.0]);
        }
        let l = dbscan(&pts, &ClusterParams::new(0.15, 3).unwrap()).unwrap();
        assert_eq!(l.n_clusters, 2);
        assert_eq!(l.noise_count(), 0);
        assert!(l.labels.iter().step_by(2).all(|&c| c == Some(0)));
    }

    #[test]
    fn isolated_point_is_noise() {
        let l = dbscan(&[vec![0.0; 4]], &ClusterParams::new(1.0, 2).unwrap()).unwrap();
        assert_eq!(l.labels, vec![None]);
        // min_pts counts the point itself
        let l = dbscan(&[vec![0.0; 4]], &ClusterParams::new(1.0, 1).unwrap()).unwrap();
        assert_eq!(l.labels, vec![Some(0)]);
    }

    #[test]
    fn huge_eps_one_cluster() {
        let pts: Vec<Vec<f64>> = (0..9).map(|i| vec![(i * i) as f64, -(i as f64), 0.5, 1.0]).collect();
        let l = dbscan(&pts, &ClusterParams::new(1e3, 3).unwrap()).unwrap();
        assert_eq!(l.n_clusters, 1);
        assert!(l.labels.iter().all(|&c| c == Some(0)));
    }

    #[test]
    fn border_goes_to_nearest_core() {
        let a = [0.0, 0.125, 0.25, 0.375, 0.5];
        let line = |xs: &[f64]| xs.iter().map(|&x| vec![x]).collect::<Vec<_>>();
        // equidistant (exactly 1.0) from both clusters: lower id
        let mut pts = a.to_vec();
        pts.push(1.5);
        pts.extend([2.5, 2.625, 2.75, 2.875, 3.0]);
        let l = dbscan(&line(&pts), &ClusterParams::new(1.0, 5).unwrap()).unwrap();
        assert_eq!(l.n_clusters, 2);
        assert_eq!(l.labels[5], Some(0));
        // reachable from both, nearer to the second
        let mut pts = a.to_vec();
        pts.push(1.4);
        pts.extend([2.25, 2.375, 2.5, 2.625, 2.75]);
        let l = dbscan(&line(&pts), &ClusterParams::new(1.0, 5).unwrap()).unwrap();
        assert_eq!(l.n_clusters, 2);
        assert_eq!(l.labels[5], Some(1));
    }

    #[test]
    fn bad_params() {
        assert!(ClusterParams::new(0.0, 3).is_err());
        assert!(ClusterParams::new(1.0, 0).is_err());
    }

    #[test]
    fn canonical_ids() {
        let l = ClusterLabeling {
            labels: vec![Some(1), None, Some(0), Some(1)],
            n_clusters: 2,
        };
        assert_eq!(l.canonical(), vec![Some(0), None, Some(1), Some(0)]);
    }
}
