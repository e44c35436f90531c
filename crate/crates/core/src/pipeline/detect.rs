use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::artifacts::{scatter_map, write_field_ppm, write_pgm, MAP_SIZE};
use super::{derive_seed, design_label};
use crate::cluster::{
    accuracy_report, cluster_latents, consolidate, dbscan, normalized_euclidean, separation_ratio,
    ClusterLabeling, ClusterParams, DetectionReport,
};
use crate::config::{ExperimentConfig, Method, Setting};
use crate::error::{Error, Result};
use crate::fieldsynth::{Dataset, FieldImage, CHANNELS};
use crate::preprocess::{preprocess, subtract_base};
use crate::reduce::autoencoder::{encode_all, train};
use crate::reduce::{pca_fit, Autoencoder, TrainConfig, TrainReport};

const SPLIT_TAG: u64 = 1;
const INIT_TAG: u64 = 2;
const SHUFFLE_TAG: u64 = 3;

/// Positions into the preprocessed image list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    /// Held-out images that are clustered and scored, ascending.
    pub test: Vec<usize>,
}

/// Seeded random split: `ceil(n * test_fraction)` held out, the rest divided
/// into validation (`round(rest * val_fraction)`) and training.
pub fn split_indices(n: usize, test_fraction: f64, val_fraction: f64, seed: u64) -> Result<Split> {
    let n_test = (n as f64 * test_fraction).ceil() as usize;
    if n_test < 4 {
        return Err(Error::Shape(format!(
            "{n} images leave {n_test} for scoring; clustering needs at least 4"
        )));
    }
    let rest = n - n_test.min(n);
    let n_val = (rest as f64 * val_fraction).round() as usize;
    if rest <= n_val {
        return Err(Error::Shape(format!("{n} images leave nothing to train on")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = perm[..n_test].to_vec();
    test.sort_unstable();
    let n_train = rest - n_val;
    Ok(Split {
        train: perm[n_test..n_test + n_train].to_vec(),
        val: perm[n_test + n_train..].to_vec(),
        test,
    })
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// PCA fitted on training and validation images; returns the held-out
/// latents and the explained variance ratios.
pub fn reduce_pca(images: &[FieldImage<f32>], split: &Split, components: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut fit_idx = split.train.clone();
    fit_idx.extend(&split.val);
    let model = pca_fit(&pick(images, &fit_idx), components)?;
    let latents = split
        .test
        .iter()
        .map(|&i| model.transform(&images[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok((latents, model.explained_variance_ratio))
}

/// Autoencoder trained on the training images, checking the training and
/// validation latents for two clusters as it goes; returns the held-out
/// latents and the training record.
pub fn reduce_cnn(
    images: &[FieldImage<f32>],
    split: &Split,
    cfg: &ExperimentConfig,
) -> Result<(Vec<Vec<f64>>, TrainReport)> {
    let (h, w) = images
        .first()
        .map(|i| i.shape())
        .ok_or_else(|| Error::Shape("no images to reduce".into()))?;
    let mut model = Autoencoder::<f32>::new(cfg.architecture.clone(), h, w, derive_seed(cfg.seed, INIT_TAG))?;
    let train_set = pick(images, &split.train);
    let val_set = pick(images, &split.val);
    let tc = TrainConfig {
        shuffle_seed: derive_seed(cfg.seed, SHUFFLE_TAG),
        ..cfg.training
    };
    let (min_pts, eps) = (cfg.min_pts, cfg.eps);
    let report = train(&mut model, &train_set, &val_set, &tc, |latents| {
        if latents.len() < 4 {
            return Ok(0);
        }
        Ok(cluster_points(latents, min_pts, eps)?.0.n_clusters)
    })?;
    let test_set = pick(images, &split.test);
    Ok((encode_all(&model, &test_set)?, report))
}

/// DBSCAN at a fixed eps, or at the knee of the second-neighbor curve.
pub fn cluster_points(points: &[Vec<f64>], min_pts: usize, eps: Setting) -> Result<(ClusterLabeling, f64)> {
    match eps {
        Setting::Auto => cluster_latents(points, min_pts),
        Setting::Value(e) => Ok((dbscan(points, &ClusterParams::new(e, min_pts)?)?, e)),
    }
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    /// One row per held-out image, in `Split::test` order.
    pub latents: Vec<Vec<f64>>,
    pub labeling: ClusterLabeling,
    pub report: DetectionReport,
    pub training: Option<TrainReport>,
    pub explained_variance: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub reference_chip: u32,
    pub test_chip: u32,
    pub test_is_trojan: bool,
    pub split: Split,
    /// Chip of every preprocessed image; used only for scoring.
    pub truth: Vec<u32>,
    pub results: Vec<MethodResult>,
    /// Test-chip image distance over the reference chip's own baseline.
    pub normalized_distance: f64,
}

impl Detection {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }

    pub fn truth_of_test(&self) -> Vec<u32> {
        self.split.test.iter().map(|&i| self.truth[i]).collect()
    }
}

/// Preprocess, reduce, cluster and score one reference/test pair.
pub fn detect(dataset: &Dataset, reference_chip: u32, test_is_trojan: bool, cfg: &ExperimentConfig) -> Result<Detection> {
    cfg.validate()?;
    let chips = dataset.chip_ids();
    if chips.len() != 2 || !chips.contains(&reference_chip) {
        return Err(Error::Protocol(format!(
            "detection compares two chips including reference {reference_chip}, found {chips:?}"
        )));
    }
    let test_chip = chips.iter().copied().find(|&c| c != reference_chip).unwrap();

    let corrected = preprocess::<f32>(dataset, &cfg.preprocess)?;
    // Labels leave the image stream here and only return for scoring.
    let (images, truth): (Vec<FieldImage<f32>>, Vec<u32>) =
        corrected.into_iter().map(|c| (c.image, c.chip_id)).unzip();

    let split = split_indices(images.len(), cfg.test_fraction, cfg.val_fraction, derive_seed(cfg.seed, SPLIT_TAG))?;
    let truth_test: Vec<u32> = split.test.iter().map(|&i| truth[i]).collect();

    let mut results = Vec::new();
    for method in [Method::Pca, Method::Cnn] {
        let wanted = match method {
            Method::Pca => cfg.method.runs_pca(),
            _ => cfg.method.runs_cnn(),
        };
        if !wanted {
            continue;
        }
        let (latents, training, explained) = match method {
            Method::Pca => {
                let (l, ev) = reduce_pca(&images, &split, cfg.components)?;
                (l, None, Some(ev))
            }
            _ => {
                let (l, tr) = reduce_cnn(&images, &split, cfg)?;
                (l, Some(tr), None)
            }
        };
        let (labeling, eps) = cluster_points(&latents, cfg.min_pts, cfg.eps)?;
        let groups = consolidate(&labeling, &truth_test, reference_chip)?;
        let mut report = accuracy_report(&groups, &labeling, &truth_test, test_is_trojan)?;
        report.separation_ratio = separation_ratio(&labeling, &latents);
        report.eps = eps;
        report.min_pts = cfg.min_pts;
        results.push(MethodResult {
            method,
            latents,
            labeling,
            report,
            training,
            explained_variance: explained,
        });
    }

    let flat = |chip: u32| -> Vec<Vec<f64>> {
        images
            .iter()
            .zip(&truth)
            .filter(|(_, &t)| t == chip)
            .map(|(img, _)| img.data().iter().map(|&v| v as f64).collect())
            .collect()
    };
    let normalized_distance = normalized_euclidean(&flat(test_chip), &flat(reference_chip))?;

    Ok(Detection {
        reference_chip,
        test_chip,
        test_is_trojan,
        split,
        truth,
        results,
        normalized_distance,
    })
}

/// Report rows in method order, with header.
pub fn report_csv(det: &Detection, label: &str, seed: u64) -> String {
    let mut s = String::from(DetectionReport::CSV_HEADER);
    s.push('\n');
    for r in &det.results {
        s.push_str(&r.report.csv_row(label, r.method.as_str(), seed, det.reference_chip, det.test_chip));
        s.push('\n');
    }
    s
}

/// Reports, latent tables, cluster maps, training curves and field images.
pub fn write_detection(dir: &Path, det: &Detection, dataset: &Dataset, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    let label = dataset
        .metadata
        .iter()
        .find(|(k, _)| k == "design.label")
        .map(|(_, v)| v.clone())
        .unwrap_or_else(|| design_label(&cfg.test));
    fs::write(dir.join("report.csv"), report_csv(det, &label, cfg.seed))?;

    let mut text = String::new();
    for r in &det.results {
        text.push_str(&r.report.summary(&format!("{} ({})", label, r.method.as_str())));
        text.push('\n');
    }
    text.push_str(&format!("normalized euclidean distance: {:.6}\n", det.normalized_distance));
    fs::write(dir.join("report.txt"), text)?;

    let truth_test = det.truth_of_test();
    for r in &det.results {
        let m = r.method.as_str();
        let mut csv = String::from("point,image");
        for d in 0..r.latents.first().map_or(0, |l| l.len()) {
            csv.push_str(&format!(",latent{d}"));
        }
        csv.push_str(",cluster,chip\n");
        for (k, lat) in r.latents.iter().enumerate() {
            csv.push_str(&format!("{k},{}", det.split.test[k]));
            for v in lat {
                csv.push_str(&format!(",{v:.9e}"));
            }
            let c = r.labeling.labels[k].map_or("noise".to_string(), |c| c.to_string());
            csv.push_str(&format!(",{c},{}\n", truth_test[k]));
        }
        fs::write(dir.join(format!("latents_{m}.csv")), csv)?;
        let map = scatter_map(&r.latents, &r.labeling.labels, r.labeling.n_clusters);
        write_pgm(&dir.join(format!("cluster_map_{m}.pgm")), MAP_SIZE, MAP_SIZE, &map)?;
        if let Some(tr) = &r.training {
            let mut f = fs::File::create(dir.join(format!("training_{m}.csv")))?;
            tr.write_csv(&mut f)?;
        }
        if let Some(ev) = &r.explained_variance {
            let mut f = fs::File::create(dir.join(format!("explained_variance_{m}.csv")))?;
            writeln!(f, "component,ratio")?;
            for (i, v) in ev.iter().enumerate() {
                writeln!(f, "{i},{v:.9e}")?;
            }
        }
    }

    // Mean base-corrected field per chip, and test minus reference.
    let corrected = subtract_base::<f64>(dataset)?;
    let mean_of = |chip: u32| {
        FieldImage::mean_of(corrected.iter().filter(|c| c.chip_id == chip).map(|c| &c.image))
    };
    let reference = mean_of(det.reference_chip)?;
    let test = mean_of(det.test_chip)?;
    let z = CHANNELS - 1;
    write_field_ppm(&dir.join("field_reference.ppm"), &reference, z)?;
    write_field_ppm(&dir.join("field_test.ppm"), &test, z)?;
    write_field_ppm(&dir.join("difference.ppm"), &test.sub(&reference)?, z)?;
    Ok(())
}
