use std::fs;
use std::path::PathBuf;

use qdm_trojan::config::{ExperimentConfig, Method, SweepAxis};
use qdm_trojan::fieldsynth::{sha256_hex, ImageSpec};
use qdm_trojan::pipeline::{cmd_detect, cmd_generate, detect, run_sweep, simulate};
use qdm_trojan::Error;

/// Same field of view as the default at a quarter of the resolution.
fn small(method: Method) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.setup.image = ImageSpec {
        height: 24,
        width: 24,
        pixel_pitch: 96.0,
        origin: [48.0, 48.0],
        ..ImageSpec::default()
    };
    c.method = method;
    c.training.max_epochs = 4;
    c.training.check_interval = 2;
    c
}

#[test]
fn chip_ids_are_blinded() {
    let cfg = small(Method::Both);
    let ds = simulate(&cfg).unwrap();
    let a = detect(&ds, 0, true, &cfg).unwrap();
    let mut renamed = ds.clone();
    for f in &mut renamed.frames {
        f.chip_id = if f.chip_id == 0 { 41 } else { 7 };
    }
    let b = detect(&renamed, 41, true, &cfg).unwrap();
    assert_eq!(a.results.len(), 2);
    for (x, y) in a.results.iter().zip(&b.results) {
        assert_eq!(x.latents, y.latents, "{:?}", x.method);
        assert_eq!(x.labeling, y.labeling);
        assert_eq!(x.report.accuracy, y.report.accuracy);
    }
}

#[test]
fn generate_is_reproducible() {
    let cfg = small(Method::Pca);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = cmd_generate(&cfg, d1.path()).unwrap();
    let b = cmd_generate(&cfg, d2.path()).unwrap();
    assert_eq!(a.len(), 2);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.checksum, y.checksum);
        assert_eq!(sha256_hex(&fs::read(&x.path).unwrap()), x.checksum);
        assert_eq!(x.frames, 100);
    }
    let other = ExperimentConfig { seed: 1, ..cfg };
    let c = cmd_generate(&other, tempfile::tempdir().unwrap().path()).unwrap();
    assert_ne!(a[0].checksum, c[0].checksum);
}

#[test]
fn provenance_records_config_and_inputs() {
    let cfg = small(Method::Pca);
    let dir = tempfile::tempdir().unwrap();
    let files = cmd_generate(&cfg, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    let prov = fs::read_to_string(dir.path().join("provenance.txt")).unwrap();
    assert!(prov.contains(&format!("config_sha256 = {}", sha256_hex(text.as_bytes()))));
    assert!(prov.contains("command = generate"));
    for f in &files {
        assert!(prov.contains(&f.checksum));
    }
    let back = ExperimentConfig::parse(&text, "config.txt").unwrap();
    assert_eq!(back.to_text(), text);
}

#[test]
fn detect_needs_two_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let files = cmd_generate(&small(Method::Pca), dir.path()).unwrap();
    let err = cmd_detect(&[files[0].path.clone()], &small(Method::Pca), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "{err}");
    let missing = cmd_detect(&[files[0].path.clone(), PathBuf::from("/nonexistent.qdm")], &small(Method::Pca), dir.path());
    assert!(matches!(missing, Err(Error::Usage(_))));
}

#[test]
fn empty_sweep_is_rejected() {
    let err = run_sweep(&small(Method::Pca), SweepAxis::TrojanScale, &[], &[0]).unwrap_err();
    assert!(matches!(err, Error::Usage(_)));
}

#[test]
fn malformed_config_points_at_the_value() {
    let err = ExperimentConfig::parse("sim.seed = 3\nimage.height = tall\n", "bad.txt").unwrap_err();
    match err {
        Error::Parse { source_name, line, column, .. } => {
            assert_eq!(source_name, "bad.txt");
            assert_eq!(line, 2);
            assert_eq!(column, 16);
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let cfg = small(Method::Both);
    let data = tempfile::tempdir().unwrap();
    let files = cmd_generate(&cfg, data.path()).unwrap();
    let paths: Vec<PathBuf> = files.iter().map(|f| f.path.clone()).collect();
    let run = |threads: usize| {
        let out = tempfile::tempdir().unwrap();
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| cmd_detect(&paths, &cfg, out.path()).unwrap());
        ["report.csv", "report.txt"].map(|f| fs::read(out.path().join(f)).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(5));
}
