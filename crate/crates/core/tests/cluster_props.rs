mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use qdm_trojan::cluster::{accuracy_report, consolidate, dbscan, knee_eps, ClusterLabeling, ClusterParams};
use rand::seq::SliceRandom;
use rand::Rng;

use common::{blob_points, brute_dbscan, canonicalize, rng};

fn run(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    canonicalize(&dbscan(points, &ClusterParams::new(eps, min_pts).unwrap()).unwrap().labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), n in 1usize..=50, eps in 0.2f64..3.0, min_pts in 1usize..=6) {
        let pts = blob_points(&mut rng(seed), n, 4);
        prop_assert_eq!(run(&pts, eps, min_pts), brute_dbscan(&pts, eps, min_pts));
    }

    #[test]
    fn permutation_invariant(seed in any::<u64>(), n in 2usize..=40, eps in 0.3f64..2.5, min_pts in 2usize..=5) {
        let mut r = rng(seed);
        let pts = blob_points(&mut r, n, 4);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let got = run(&shuffled, eps, min_pts);
        let mut back = vec![None; n];
        for (k, &i) in perm.iter().enumerate() {
            back[i] = got[k];
        }
        prop_assert_eq!(canonicalize(&back), run(&pts, eps, min_pts));
    }

    #[test]
    fn rigid_motion_and_scaling(seed in any::<u64>(), n in 2usize..=40, eps in 0.3f64..2.5, s in 0.1f64..10.0) {
        let mut r = rng(seed);
        let pts = blob_points(&mut r, n, 4);
        let q = DMatrix::<f64>::from_fn(4, 4, |_, _| r.gen_range(-1.0..1.0)).qr().q();
        let shift: Vec<f64> = (0..4).map(|_| r.gen_range(-50.0..50.0)).collect();
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| (0..4).map(|i| (0..4).map(|j| q[(i, j)] * p[j]).sum::<f64>() + shift[i]).collect())
            .collect();
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * s).collect()).collect();
        let base = run(&pts, eps, 3);
        // Rotations perturb distances by rounding; stay off the boundary.
        let d = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let marginal = pts.iter().any(|a| pts.iter().any(|b| (d(a, b) - eps).abs() < 1e-9));
        prop_assume!(!marginal);
        prop_assert_eq!(run(&moved, eps, 3), base.clone());
        prop_assert_eq!(run(&scaled, eps * s, 3), base);
    }

    #[test]
    fn report_totals_reconcile(seed in any::<u64>(), n in 4usize..=40, trojan in any::<bool>()) {
        let mut r = rng(seed);
        let pts = blob_points(&mut r, n, 4);
        let truth: Vec<u32> = (0..n).map(|i| if i == 0 { 0 } else if i == 1 { 1 } else { r.gen_range(0..2) }).collect();
        let eps = knee_eps(&pts).unwrap();
        let lab = dbscan(&pts, &ClusterParams::new(eps, 3).unwrap()).unwrap();
        let groups = consolidate(&lab, &truth, 0).unwrap();
        let rep = accuracy_report(&groups, &lab, &truth, trojan).unwrap();
        prop_assert_eq!(rep.total, n);
        prop_assert_eq!(rep.false_positives + rep.false_negatives + rep.correct + rep.noise, rep.total);
        prop_assert!((0.0..=1.0).contains(&rep.accuracy));
        prop_assert_eq!(rep.false_negative_rate.is_some(), trojan);
    }
}

#[test]
fn oracle_agrees_on_hand_cases() {
    // chain of three points, the middle one core at min_pts 3
    let pts = vec![vec![0.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0, 0.0], vec![9.0, 0.0, 0.0, 0.0]];
    assert_eq!(brute_dbscan(&pts, 1.0, 3), vec![Some(0), Some(0), Some(0), None]);
    assert_eq!(run(&pts, 1.0, 3), vec![Some(0), Some(0), Some(0), None]);
    assert_eq!(run(&pts, 0.5, 1), vec![Some(0), Some(1), Some(2), Some(3)]);
}

#[test]
fn single_cluster_has_one_group() {
    let lab = ClusterLabeling {
        labels: vec![Some(0); 6],
        n_clusters: 1,
    };
    let truth = [0, 1, 0, 1, 1, 1];
    let g = consolidate(&lab, &truth, 0).unwrap();
    assert_eq!(g.n_groups, 1);
    assert_eq!(g.cluster_chip, vec![0]);
    let rep = accuracy_report(&g, &lab, &truth, true).unwrap();
    assert_eq!(rep.verdict(), "no trojan detected");
    assert_eq!(rep.false_negatives, 4);
}
