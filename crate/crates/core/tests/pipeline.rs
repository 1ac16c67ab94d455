use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use icon_core::distributions::io::{read_points_csv, write_points_csv};
use icon_core::distributions::Metric;
use icon_core::loss::{icon_loss, Direction};
use icon_core::pipeline::*;
use icon_core::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn blessing() -> bool {
    std::env::var_os("ICON_BLESS").is_some()
}

#[test]
fn separable_blobs_reach_perfect_accuracy() {
    let cfg = ExperimentConfig::load(fixture("separable_blobs.json")).unwrap();
    let out = run_in_memory(&cfg).unwrap();
    assert_eq!(out.metrics.hungarian_accuracy, Some(1.0));
    assert_eq!(out.histogram.iter().sum::<u64>(), 120);
}

#[test]
fn reruns_write_identical_artifacts() {
    let cfg = ExperimentConfig::load(fixture("separable_blobs.json")).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, Some(a.path())).unwrap();
    run_experiment(&cfg, Some(b.path())).unwrap();
    for file in ["metrics.json", "trace.csv", "assignments.csv", "histogram.csv"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn artifacts_follow_the_frozen_formats() {
    let mut cfg = ExperimentConfig::load(fixture("separable_blobs.json")).unwrap();
    cfg.optimizer.epochs = 20;
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, Some(dir.path())).unwrap();

    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    let keys: BTreeSet<&str> = metrics.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, BTreeSet::from(["config_hash", "final_loss", "hungarian_accuracy", "seed"]));
    assert_eq!(metrics["config_hash"], cfg.hash());

    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("epoch,loss,lr"));
    assert_eq!(lines.count(), out.trace.len());
    let first = trace.lines().nth(1).unwrap();
    let loss = first.split(',').nth(1).unwrap();
    // 17 significant digits
    assert_eq!(loss.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);

    let assignments = fs::read_to_string(dir.path().join("assignments.csv")).unwrap();
    assert_eq!(assignments.lines().next(), Some("index,cluster,max_prob,label"));
    assert_eq!(assignments.lines().count(), 121);

    let mut rdr = csv::Reader::from_path(dir.path().join("histogram.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["bin", "lower", "upper", "count"]);
    let mass: u64 = rdr.records().map(|r| r.unwrap()[3].parse::<u64>().unwrap()).sum();
    assert_eq!(mass, 120);
}

#[test]
fn uniform_supervision_is_uninformative() {
    let mut cfg = ExperimentConfig::load(fixture("separable_blobs.json")).unwrap();
    cfg.supervisory.alpha = 1.0;
    cfg.supervisory.q_alpha = 0.0;
    let data = load_dataset(&cfg).unwrap();
    let (p, _) = build_supervisory(&cfg, &data).unwrap();
    let n = 120;
    for i in 0..n {
        for j in 0..n {
            assert_eq!(p.get(i, j), if i == j { 0.0 } else { 1.0 / (n - 1) as f64 });
        }
    }
    let out = run_in_memory(&cfg).unwrap();
    // the loss is the mean row KL from uniform to the trained q
    let kernel = cfg.kernel.build(None).unwrap().with_inputs(head_inputs(data.points.view()));
    let q = kernel.evaluate(&out.params).unwrap();
    let kl = icon_loss(&p, &q, Direction::Forward).unwrap().total;
    assert!((kl - out.metrics.final_loss).abs() <= 1e-12, "{kl} vs {}", out.metrics.final_loss);
    let acc = out.metrics.hungarian_accuracy.unwrap();
    assert!(acc < 0.6, "accuracy {acc} should be near chance");
}

#[test]
fn knn_graph_contract() {
    let d = synth_generate(SynthKind::Rings, 30, 0.05, 3).unwrap();
    let g = build_knn_graph(d.points.view(), 4, Metric::Euclidean).unwrap();
    for i in 0..30 {
        assert_eq!(g.out_degree(i), 4);
        assert_eq!(g.degrees()[i], 4.0);
    }
    assert!(g.edges().iter().all(|e| e.2 == 1.0 && e.0 != e.1));
    let scaled = ndarray::Array2::from_shape_fn((30, 2), |(i, c)| d.points[[i, c]] * (1.0 + i as f64));
    let a = build_knn_graph(d.points.view(), 4, Metric::Cosine).unwrap();
    let b = build_knn_graph(scaled.view(), 4, Metric::Cosine).unwrap();
    assert_eq!(a.edges(), b.edges());
    assert!(build_knn_graph(d.points.view(), 30, Metric::Euclidean).is_err());
}

#[test]
fn grids_emit_one_row_per_point() {
    let mut cfg = ExperimentConfig::load(fixture("noisy_blobs.json")).unwrap();
    cfg.optimizer.epochs = 30;
    cfg.optimizer.restarts = 1;
    let rows = ablation_sweep(&cfg, &[0.0, 0.3, 0.6], &[1, 2], &[0], Sides::Both, None).unwrap();
    assert_eq!(rows.len(), 6);
    let single = ablation_sweep(&cfg, &[0.3], &[2], &[4], Sides::Both, None).unwrap();
    let direct = run_in_memory(&grid_config(&cfg, 0.3, 2, Sides::Both, 4)).unwrap();
    assert_eq!(single[0].hungarian_accuracy, direct.metrics.hungarian_accuracy);
    assert_eq!(single[0].final_loss, direct.metrics.final_loss);
    assert!(ablation_sweep(&cfg, &[], &[1], &[0], Sides::Both, None).is_err());

    let dir = tempfile::tempdir().unwrap();
    ablation_sweep(&cfg, &[0.3], &[1], &[0, 1], Sides::P, Some(dir.path())).unwrap();
    for seed in [0, 1] {
        assert!(dir.path().join(run_dir_name(0.3, 1, seed)).join("metrics.json").exists());
    }
}

#[test]
fn noisy_blobs_sweep_matches_golden_trend() {
    let cfg = ExperimentConfig::load(fixture("noisy_blobs.json")).unwrap();
    let rows = ablation_sweep(&cfg, &[0.0, 0.4, 0.8], &[1], &[0, 1, 2], Sides::Both, None).unwrap();
    // calibration: confidence does not grow with α on this fixture
    for w in rows.windows(2) {
        assert!(w[1].mean_max_prob <= w[0].mean_max_prob, "{rows:?}");
    }
    let golden = fixture("noisy_blobs_trend.csv");
    let tmp = tempfile::NamedTempFile::new().unwrap();
    write_sweep_csv(&rows, tmp.path()).unwrap();
    if blessing() {
        fs::copy(tmp.path(), &golden).unwrap();
    }
    let mut expected = csv::Reader::from_path(&golden).unwrap();
    let mut actual = csv::Reader::from_path(tmp.path()).unwrap();
    assert_eq!(expected.headers().unwrap(), actual.headers().unwrap());
    for (e, a) in expected.records().zip(actual.records()) {
        let (e, a) = (e.unwrap(), a.unwrap());
        for (x, y) in e.iter().zip(a.iter()) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }
}

#[test]
fn moons_dump_matches_golden_file() {
    let d = synth_generate(SynthKind::Moons, 200, 0.1, 0).unwrap();
    let golden = fixture("moons_n200.csv");
    let tmp = tempfile::NamedTempFile::new().unwrap();
    write_points_csv(tmp.path(), &d.points, Some(&d.labels)).unwrap();
    if blessing() {
        fs::copy(tmp.path(), &golden).unwrap();
    }
    let stored = read_points_csv(&golden).unwrap();
    assert_eq!(stored.labels.as_deref(), Some(&d.labels[..]));
    for (x, y) in stored.points.iter().zip(d.points.iter()) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn config_errors_point_at_the_offending_value() {
    let text = fs::read_to_string(fixture("separable_blobs.json")).unwrap();
    let cases = [
        (text.replace("\"walk_steps\": 1", "\"walk_steps\": 0"), "/supervisory/walk_steps"),
        (text.replace("\"q_alpha\": 0.4", "\"q_alpha\": -0.1"), "/supervisory/q_alpha"),
        (text.replace("\"kind\": \"blobs\"", "\"kind\": \"spirals\""), "/dataset/synthetic/kind"),
        (text.replace("\"learning_rate\": 0.3", "\"learning_rate\": 0"), "/optimizer/learning_rate"),
        (text.replace("\"family\": \"cluster\"", "\"family\": \"harmonic\""), "/kernel/family"),
    ];
    for (bad, pointer) in cases {
        match ExperimentConfig::from_json(&bad) {
            Err(Error::Config { pointer: p, .. }) => assert_eq!(p, pointer),
            other => panic!("{pointer}: {other:?}"),
        }
    }
}

#[test]
fn csv_datasets_resolve_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = synth_generate(SynthKind::Blobs, 24, 0.2, 1).unwrap();
    write_points_csv(dir.path().join("points.csv"), &d.points, Some(&d.labels)).unwrap();
    let cfg = r#"{
        "dataset": {"csv": {"path": "points.csv"}},
        "kernel": {"family": "gaussian", "sigma": 1.0, "clusters": 2},
        "optimizer": {"epochs": 40, "learning_rate": 0.05}
    }"#;
    fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let cfg = ExperimentConfig::load(dir.path().join("cfg.json")).unwrap();
    let out = run_in_memory(&cfg).unwrap();
    assert_eq!(out.predicted.len(), 24);
    assert!(out.metrics.hungarian_accuracy.unwrap() >= 1.0 / 3.0);
}
