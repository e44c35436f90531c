use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::artifacts::{trend_plot, write_pgm};
use super::detect::detect;
use super::{design_label, simulate, REFERENCE_CHIP};
use crate::cluster::DetectionReport;
use crate::config::{ExperimentConfig, Method, SweepAxis};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub value: f64,
    pub seed: u64,
    pub method: Method,
    pub test_label: String,
    pub report: DetectionReport,
    pub normalized_distance: f64,
}

/// Simulates and detects once per `(value, seed)`, jobs in parallel; the
/// records come back in value-major, seed-minor, method order.
pub fn run_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64], seeds: &[u64]) -> Result<Vec<SweepRecord>> {
    if values.is_empty() {
        return Err(Error::Usage(format!("sweep over {} has no values", axis.as_str())));
    }
    if seeds.is_empty() {
        return Err(Error::Usage("sweep has no seeds".into()));
    }
    let jobs: Vec<(f64, u64)> = values.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let per_job: Vec<Vec<SweepRecord>> = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let mut c = cfg.with_axis_value(axis, value)?;
            c.seed = seed;
            let ds = simulate(&c)?;
            let det = detect(&ds, REFERENCE_CHIP, c.test.has_active_trojan(), &c)?;
            let label = design_label(&c.test);
            Ok(det
                .results
                .into_iter()
                .map(|r| SweepRecord {
                    value,
                    seed,
                    method: r.method,
                    test_label: label.clone(),
                    report: r.report,
                    normalized_distance: det.normalized_distance,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn fmt_rate(v: f64) -> String {
    if v.is_nan() {
        "na".into()
    } else {
        format!("{v:.6}")
    }
}

/// Seed-averaged rows laid out like a size/frequency comparison table:
/// trojan-free circuit, trojan, axis value, then FP/FN/accuracy per method.
pub fn sweep_table(cfg: &ExperimentConfig, axis: SweepAxis, records: &[SweepRecord]) -> String {
    let mut values: Vec<f64> = Vec::new();
    for r in records {
        if !values.contains(&r.value) {
            values.push(r.value);
        }
    }
    let mut s = format!(
        "trojan_free_circuit,trojan,{},pca_fp,pca_fn,pca_accuracy,cnn_fp,cnn_fn,cnn_accuracy,normalized_distance\n",
        axis.as_str()
    );
    for v in values {
        let at: Vec<&SweepRecord> = records.iter().filter(|r| r.value == v).collect();
        let label = at.first().map_or(String::new(), |r| r.test_label.clone());
        let stat = |m: Method, f: &dyn Fn(&DetectionReport) -> Option<f64>| {
            mean(at.iter().filter(|r| r.method == m).filter_map(|r| f(&r.report)))
        };
        let mut row = format!("{},{label},{v}", design_label(&cfg.reference));
        for m in [Method::Pca, Method::Cnn] {
            row.push_str(&format!(
                ",{},{},{}",
                fmt_rate(stat(m, &|r| Some(r.false_positive_rate))),
                fmt_rate(stat(m, &|r| r.false_negative_rate)),
                fmt_rate(stat(m, &|r| Some(r.accuracy))),
            ));
        }
        let mut seen = Vec::new();
        let d = mean(at.iter().filter(|r| {
            let fresh = !seen.contains(&r.seed);
            seen.push(r.seed);
            fresh
        })
        .map(|r| r.normalized_distance));
        row.push_str(&format!(",{}\n", fmt_rate(d)));
        s.push_str(&row);
    }
    s
}

/// `sweep.csv` (one row per value, seed and method), `table.csv` and a
/// trend plot of mean accuracy (PCA dark, CNN lighter).
pub fn write_sweep(dir: &Path, cfg: &ExperimentConfig, records: &[SweepRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let axis = cfg.sweep.axis;
    let mut tidy = format!("axis,value,{}\n", DetectionReport::CSV_HEADER);
    for r in records {
        tidy.push_str(&format!(
            "{},{},{}\n",
            axis.as_str(),
            r.value,
            r.report.csv_row(&r.test_label, r.method.as_str(), r.seed, REFERENCE_CHIP, super::TEST_CHIP)
        ));
    }
    fs::write(dir.join("sweep.csv"), tidy)?;
    fs::write(dir.join("table.csv"), sweep_table(cfg, axis, records))?;

    let mut values: Vec<f64> = Vec::new();
    for r in records {
        if !values.contains(&r.value) {
            values.push(r.value);
        }
    }
    let series: Vec<Vec<f64>> = [Method::Pca, Method::Cnn]
        .iter()
        .map(|&m| {
            values
                .iter()
                .map(|&v| mean(records.iter().filter(|r| r.method == m && r.value == v).map(|r| r.report.accuracy)))
                .collect()
        })
        .collect();
    let (w, h, img) = trend_plot(&series);
    write_pgm(&dir.join("trend.pgm"), w, h, &img)?;
    Ok(())
}
