use std::fmt::Write as _;

use super::dbscan::{euclidean, ClusterLabeling};
use crate::error::{Error, Result};

/// Clusters merged into at most two chip groups by majority vote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Consolidation {
    /// Chip assigned to each cluster id.
    pub cluster_chip: Vec<u32>,
    pub reference_chip: u32,
    pub test_chip: u32,
    pub n_groups: usize,
    /// Clusters whose majority was a tie (given to the lower chip id).
    pub tied_clusters: Vec<usize>,
}

/// Assigns every cluster to its majority chip. With only one group left it
/// is handed to `reference_chip`, the known trojan-free device.
pub fn consolidate(labeling: &ClusterLabeling, truth: &[u32], reference_chip: u32) -> Result<Consolidation> {
    if truth.len() != labeling.labels.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} points",
            truth.len(),
            labeling.labels.len()
        )));
    }
    let mut chips: Vec<u32> = truth.to_vec();
    chips.sort_unstable();
    chips.dedup();
    if chips.len() > 2 {
        return Err(Error::Protocol(format!("comparisons take two chips, found {chips:?}")));
    }
    if !chips.contains(&reference_chip) {
        return Err(Error::Protocol(format!("reference chip {reference_chip} not among {chips:?}")));
    }
    let test_chip = chips.iter().copied().find(|&c| c != reference_chip).unwrap_or(reference_chip);
    let mut cluster_chip = Vec::with_capacity(labeling.n_clusters);
    let mut tied_clusters = Vec::new();
    for c in 0..labeling.n_clusters {
        let (mut low, mut high) = (0usize, 0usize);
        for (l, &t) in labeling.labels.iter().zip(truth) {
            if *l == Some(c) {
                if t == chips[0] {
                    low += 1;
                } else {
                    high += 1;
                }
            }
        }
        if low == high {
            tied_clusters.push(c);
            log::warn!("cluster {c} is evenly split between chips; assigned to chip {}", chips[0]);
        }
        cluster_chip.push(if low >= high { chips[0] } else { *chips.last().unwrap() });
    }
    let mut groups = cluster_chip.clone();
    groups.sort_unstable();
    groups.dedup();
    let n_groups = groups.len();
    if n_groups == 1 {
        cluster_chip.iter_mut().for_each(|c| *c = reference_chip);
    }
    Ok(Consolidation {
        cluster_chip,
        reference_chip,
        test_chip,
        n_groups,
        tied_clusters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub total: usize,
    pub noise: usize,
    pub reference_points: usize,
    pub test_points: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub correct: usize,
    pub false_positive_rate: f64,
    /// Absent when the test chip is trojan-free.
    pub false_negative_rate: Option<f64>,
    pub accuracy: f64,
    pub noise_fraction: f64,
    pub n_clusters: usize,
    pub n_groups: usize,
    pub group_assignment: Vec<u32>,
    pub test_is_trojan: bool,
    pub separation_ratio: Option<f64>,
    pub eps: f64,
    pub min_pts: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores a consolidated clustering.
///
/// Trojan-inserted test chip: reference points in a group assigned to the
/// test chip are false positives, test points in the reference group false
/// negatives; rates are over the non-noise points of each chip.
/// Trojan-free test chip: any point outside the reference group is a false
/// positive, rated over all non-noise points; there are no false negatives.
/// Accuracy is the correctly grouped share of non-noise points.
pub fn accuracy_report(
    groups: &Consolidation,
    labeling: &ClusterLabeling,
    truth: &[u32],
    test_is_trojan: bool,
) -> Result<DetectionReport> {
    if truth.len() != labeling.labels.len() {
        return Err(Error::Shape("truth and labels differ in length".into()));
    }
    let (mut noise, mut ref_pts, mut test_pts, mut fp, mut fneg, mut correct) = (0, 0, 0, 0, 0, 0);
    for (l, &chip) in labeling.labels.iter().zip(truth) {
        let Some(c) = l else {
            noise += 1;
            continue;
        };
        let assigned = groups.cluster_chip[*c];
        let is_ref = chip == groups.reference_chip;
        if is_ref {
            ref_pts += 1;
        } else {
            test_pts += 1;
        }
        if test_is_trojan {
            if assigned == chip {
                correct += 1;
            } else if is_ref {
                fp += 1;
            } else {
                fneg += 1;
            }
        } else if assigned == groups.reference_chip {
            correct += 1;
        } else {
            fp += 1;
        }
    }
    let non_noise = ref_pts + test_pts;
    let (fp_rate, fn_rate) = if test_is_trojan {
        (ratio(fp, ref_pts), Some(ratio(fneg, test_pts)))
    } else {
        (ratio(fp, ref_pts + test_pts), None)
    };
    Ok(DetectionReport {
        total: truth.len(),
        noise,
        reference_points: ref_pts,
        test_points: test_pts,
        false_positives: fp,
        false_negatives: fneg,
        correct,
        false_positive_rate: fp_rate,
        false_negative_rate: fn_rate,
        accuracy: ratio(correct, non_noise),
        noise_fraction: ratio(noise, truth.len()),
        n_clusters: labeling.n_clusters,
        n_groups: groups.n_groups,
        group_assignment: groups.cluster_chip.clone(),
        test_is_trojan,
        separation_ratio: None,
        eps: f64::NAN,
        min_pts: 0,
    })
}

impl DetectionReport {
    pub fn trojan_detected(&self) -> bool {
        self.n_groups >= 2
    }

    pub fn verdict(&self) -> &'static str {
        if self.trojan_detected() {
            "trojan detected"
        } else {
            "no trojan detected"
        }
    }

    pub const CSV_HEADER: &'static str = "label,method,seed,reference_chip,test_chip,test_is_trojan,verdict,points,noise,clusters,groups,fp,fn,fp_rate,fn_rate,accuracy,noise_fraction,separation_ratio,eps,min_pts";

    pub fn csv_row(&self, label: &str, method: &str, seed: u64, reference_chip: u32, test_chip: u32) -> String {
        format!(
            "{label},{method},{seed},{reference_chip},{test_chip},{},{},{},{},{},{},{},{},{:.6},{},{:.6},{:.6},{},{:.9e},{}",
            self.test_is_trojan,
            self.verdict(),
            self.total,
            self.noise,
            self.n_clusters,
            self.n_groups,
            self.false_positives,
            self.false_negatives,
            self.false_positive_rate,
            self.false_negative_rate.map_or("na".to_string(), |r| format!("{r:.6}")),
            self.accuracy,
            self.noise_fraction,
            format_separation(self.separation_ratio),
            self.eps,
            self.min_pts,
        )
    }

    pub fn summary(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{title}");
        let _ = writeln!(s, "  verdict:          {}", self.verdict());
        let _ = writeln!(s, "  clusters/groups:  {} / {}", self.n_clusters, self.n_groups);
        let _ = writeln!(
            s,
            "  false positives:  {}/{} ({:.1}%)",
            self.false_positives,
            if self.test_is_trojan { self.reference_points } else { self.reference_points + self.test_points },
            100.0 * self.false_positive_rate
        );
        match self.false_negative_rate {
            Some(r) => {
                let _ = writeln!(s, "  false negatives:  {}/{} ({:.1}%)", self.false_negatives, self.test_points, 100.0 * r);
            }
            None => {
                let _ = writeln!(s, "  false negatives:  n/a");
            }
        }
        let _ = writeln!(s, "  accuracy:         {:.1}%", 100.0 * self.accuracy);
        let _ = writeln!(s, "  noise points:     {}/{}", self.noise, self.total);
        let _ = writeln!(s, "  separation ratio: {}", format_separation(self.separation_ratio));
        let _ = writeln!(s, "  eps / min_pts:    {:.6e} / {}", self.eps, self.min_pts);
        s
    }
}

pub fn format_separation(r: Option<f64>) -> String {
    match r {
        None => "na".into(),
        Some(v) if v.is_infinite() => "unbounded".into(),
        Some(v) => format!("{v:.6}"),
    }
}

fn centroid(points: &[&[f64]]) -> Vec<f64> {
    let dim = points[0].len();
    let mut c = vec![0.0; dim];
    for p in points {
        for (a, b) in c.iter_mut().zip(p.iter()) {
            *a += b;
        }
    }
    c.iter_mut().for_each(|v| *v /= points.len() as f64);
    c
}

/// Smallest centroid distance between clusters over the largest cluster RMS
/// spread; `None` with fewer than two clusters, infinite when every cluster
/// is a single location.
pub fn separation_ratio<P: AsRef<[f64]>>(labeling: &ClusterLabeling, points: &[P]) -> Option<f64> {
    if labeling.n_clusters < 2 {
        return None;
    }
    let mut centroids = Vec::new();
    let mut spread: f64 = 0.0;
    for c in 0..labeling.n_clusters {
        let members: Vec<&[f64]> = labeling.members(c).into_iter().map(|i| points[i].as_ref()).collect();
        let ctr = centroid(&members);
        let ms = members.iter().map(|p| euclidean(p, &ctr).powi(2)).sum::<f64>() / members.len() as f64;
        spread = spread.max(ms.sqrt());
        centroids.push(ctr);
    }
    let mut min_d = f64::INFINITY;
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            min_d = min_d.min(euclidean(&centroids[i], &centroids[j]));
        }
    }
    Some(if spread > 0.0 { min_d / spread } else { f64::INFINITY })
}

/// Mean distance of `test` to the mean of the even-indexed golden images,
/// over the same quantity for the odd-indexed golden images.
pub fn normalized_euclidean<P: AsRef<[f64]>>(test: &[P], golden: &[P]) -> Result<f64> {
    if golden.len() < 4 {
        return Err(Error::Protocol(format!("golden set needs at least 4 images, got {}", golden.len())));
    }
    if test.is_empty() {
        return Err(Error::Protocol("no test images".into()));
    }
    let dim = golden[0].as_ref().len();
    if test.iter().chain(golden).any(|p| p.as_ref().len() != dim) {
        return Err(Error::Shape("image sizes differ".into()));
    }
    let a: Vec<&[f64]> = golden.iter().step_by(2).map(|p| p.as_ref()).collect();
    let reference = centroid(&a);
    let mean_dist = |set: &mut dyn Iterator<Item = &[f64]>| {
        let (mut s, mut n) = (0.0, 0usize);
        for p in set {
            s += euclidean(p, &reference);
            n += 1;
        }
        s / n as f64
    };
    let base = mean_dist(&mut golden.iter().skip(1).step_by(2).map(|p| p.as_ref()));
    if !(base > 0.0) {
        return Err(Error::Range("golden images coincide; normalization distance is zero".into()));
    }
    Ok(mean_dist(&mut test.iter().map(|p| p.as_ref())) / base)
}
