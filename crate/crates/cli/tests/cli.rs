use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn icon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_icon"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let st = icon()
            .args(["synth", "--kind", "rings", "--n", "40", "--seed", "9", "--quiet", "--out"])
            .arg(path)
            .status()
            .unwrap();
        assert!(st.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let st = icon().args(["synth", "--kind", "spirals", "--out"]).arg(dir.path().join("c.csv")).status().unwrap();
    assert!(!st.success());
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = icon()
        .args(["train", "--config"])
        .arg(fixture("separable_blobs.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(metrics["hungarian_accuracy"], 1.0);
    let on_disk: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics, on_disk);

    let out = icon().arg("eval").arg(dir.path().join("assignments.csv")).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["hungarian_accuracy"], 1.0);
}

#[test]
fn schema_errors_name_the_json_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"dataset": {"synthetic": {"kind": "blobs", "n": 30}}, "kernel": {"family": "cluster", "clusters": "three"}}"#).unwrap();
    let out = icon().args(["train", "--out"]).arg(dir.path()).arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/kernel/clusters"));
}

#[test]
fn build_p_writes_a_square_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let st = icon().args(["build-p", "--quiet", "--config"]).arg(fixture("separable_blobs.json")).arg("--out").arg(&path).status().unwrap();
    assert!(st.success());
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rdr.headers().unwrap().len(), 120);
    for rec in rdr.records() {
        let sum: f64 = rec.unwrap().iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn verify_emits_json_reports() {
    let out = icon().args(["verify", "--only", "sne,harmonic", "--quiet"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r["passed"] == true));
    assert!(!icon().args(["verify", "--only", "nope"]).status().unwrap().success());
}

#[test]
fn sweep_writes_table_and_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    let st = icon()
        .env("ICON_THREADS", "2")
        .args(["sweep", "--alphas", "0,0.5", "--walks", "1,2", "--seeds", "1", "--quiet", "--config"])
        .arg(fixture("noisy_blobs.json"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(dir.path().join("alpha_0.5_walk_2_seed_0/metrics.json").exists());
}
