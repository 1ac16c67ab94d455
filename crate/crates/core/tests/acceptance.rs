//! One PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use icon_core::classic::lloyd_kmeans;
use icon_core::equivalence::{
    anisotropic, infonce_suite, kmeans_sigma, ncut_suite, sne_suite, supervised_suite, tsne_suite, verify_icon_kmeans,
    verify_kmeans_identity, verify_pca, verify_triplet_bounds, vicreg_suite, TheoremReport,
};
use icon_core::kernels::simplex_params;
use icon_core::loss::Direction;
use icon_core::optim::restart_rng;
use icon_core::pipeline::{
    ablation_sweep, max_weight_matching, run_in_memory, synth_generate, ExperimentConfig, Sides, SynthKind,
};
use icon_core::Result;

const SEED: u64 = 0;

const HARNESS_GAP: f64 = 1e-10;
const HARNESS_INSTANCES: usize = 20;
const HARNESS_BUDGET: Duration = Duration::from_secs(10);
const KMEANS_SPREAD: f64 = 1e-8;
const KMEANS_OBJECTIVE_REL: f64 = 0.01;
const KMEANS_BUDGET: Duration = Duration::from_secs(30);
const TRIPLET_INSTANCES: usize = 1000;
const TRIPLET_SIGMAS: [f64; 3] = [1.0, 0.5, 0.1];
const PCA_ANGLE: f64 = 1e-2;
const PCA_VARIANCE: f64 = 1e-3;
const PCA_SEEDS: u64 = 3;
const PCA_BUDGET: Duration = Duration::from_secs(10);
const NCUT_GRAPHS: usize = 20;
const NCUT_REQUIRED: usize = 18;
const GRADIENT_REL: f64 = 1e-4;
const PIPELINE_SEEDS: u64 = 10;
const PIPELINE_BUDGET: Duration = Duration::from_secs(120);
const HUNGARIAN_TRIALS: usize = 200;

type Criterion = fn() -> Result<Outcome>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn theorem_harness() -> Result<Outcome> {
    let start = Instant::now();
    let mut reports: Vec<TheoremReport> = vec![
        sne_suite(SEED, HARNESS_INSTANCES)?,
        tsne_suite(SEED, HARNESS_INSTANCES)?,
        infonce_suite(SEED, HARNESS_INSTANCES)?,
        vicreg_suite(SEED, HARNESS_INSTANCES)?,
    ];
    reports.extend(supervised_suite(SEED, HARNESS_INSTANCES)?);
    let elapsed = start.elapsed();
    let worst = reports.iter().map(|r| r.max_abs_gap).fold(0.0, f64::max);
    let bad: Vec<&str> = reports
        .iter()
        .filter(|r| !(r.passed && r.max_abs_gap <= HARNESS_GAP && r.instances >= HARNESS_INSTANCES))
        .map(|r| r.id.name())
        .collect();
    let ok = bad.is_empty() && elapsed < HARNESS_BUDGET;
    let names: Vec<&str> = reports.iter().map(|r| r.id.name()).collect();
    Ok(outcome(
        ok,
        format!("{} × {HARNESS_INSTANCES} instances, max gap {worst:.2e}, failing {bad:?}, {elapsed:.2?}", names.join("/")),
    ))
}

fn kmeans() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = restart_rng(SEED, 7);
    let datasets = [
        common::normal(&mut rng, 6, 2, 1.0),
        synth_generate(SynthKind::Blobs, 24, 0.7, SEED)?.points,
        common::normal(&mut rng, 15, 4, 2.0),
    ];
    let mut spread: f64 = 0.0;
    let mut identity_ok = true;
    for (k, x) in datasets.iter().enumerate() {
        let m = 2 + k % 2;
        let samples: Vec<_> = (0..10)
            .map(|_| simplex_params(common::normal(&mut rng, x.nrows(), m, 2.0).view()))
            .collect();
        let r = verify_kmeans_identity(x.view(), kmeans_sigma(x.view()), &samples)?;
        let s = r.metrics["delta_spread"];
        spread = spread.max(s);
        identity_ok &= r.passed && s <= KMEANS_SPREAD;
    }
    let blobs = synth_generate(SynthKind::Blobs, 60, 1.0, SEED)?;
    let r = verify_icon_kmeans(blobs.points.view(), 3, 5, SEED)?;
    let lloyd = lloyd_kmeans(blobs.points.view(), 3, 5, SEED)?.objective;
    let icon = r.metrics["icon_objective"];
    let rel = (icon - lloyd).abs() / lloyd;
    let elapsed = start.elapsed();
    let ok = identity_ok && rel <= KMEANS_OBJECTIVE_REL && elapsed < KMEANS_BUDGET;
    Ok(outcome(
        ok,
        format!("identity spread {spread:.2e} on 3 datasets × 10 assignments; I-Con {icon:.4} vs Lloyd {lloyd:.4} (rel {rel:.2e}), {elapsed:.2?}"),
    ))
}

fn triplet() -> Result<Outcome> {
    let r = verify_triplet_bounds(SEED, TRIPLET_INSTANCES, &TRIPLET_SIGMAS)?;
    let g1 = r.metrics["mean_gap_sigma_1"];
    let g01 = r.metrics["mean_gap_sigma_0.1"];
    let ok = r.passed && g01 < g1;
    Ok(outcome(
        ok,
        format!(
            "{} instances, worst bound excess {:.2e}, mean gap σ=1 {g1:.4e}, σ=0.1 {g01:.4e}",
            r.instances, r.max_abs_gap
        ),
    ))
}

fn pca() -> Result<Outcome> {
    let start = Instant::now();
    let (mut angle, mut shortfall): (f64, f64) = (0.0, 0.0);
    let mut ok = true;
    for s in 0..PCA_SEEDS {
        let x = anisotropic(SEED + s, 50, &[4.0, 2.5, 1.0, 0.5, 0.2]);
        let r = verify_pca(x.view(), 2, SEED + s)?;
        let (a, v) = (r.metrics["max_principal_angle"], r.metrics["variance_shortfall"]);
        angle = angle.max(a);
        shortfall = shortfall.max(v);
        ok &= a <= PCA_ANGLE && v <= PCA_VARIANCE;
    }
    let elapsed = start.elapsed();
    ok &= elapsed < PCA_BUDGET;
    Ok(outcome(
        ok,
        format!("50×5, {PCA_SEEDS} seeds: max angle {angle:.2e} rad, variance shortfall {shortfall:.2e}, {elapsed:.2?}"),
    ))
}

fn ncut() -> Result<Outcome> {
    let (_, outcomes) = ncut_suite(SEED, NCUT_GRAPHS)?;
    let agree = outcomes.iter().filter(|o| o.agree).count();
    let disagreements: Vec<usize> = outcomes.iter().filter(|o| !o.agree).map(|o| o.graph).collect();
    Ok(outcome(
        agree >= NCUT_REQUIRED,
        format!("argmin agreement {agree}/{NCUT_GRAPHS} (disagreeing graphs {disagreements:?})"),
    ))
}

fn gradients() -> Result<Outcome> {
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checks = 0;
    let mut ok = true;
    for seed in [SEED, SEED + 1] {
        for case in common::cases(seed) {
            for direction in [Direction::Forward, Direction::Reverse] {
                let r = common::check(&case, direction, seed);
                checks += 1;
                ok &= r.max_rel_error < GRADIENT_REL;
                if r.max_rel_error >= worst.0 {
                    worst = (r.max_rel_error, format!("{} {direction:?}", case.name));
                }
            }
        }
    }
    Ok(outcome(
        ok,
        format!("{checks} checks over 8 families × 2 directions, worst rel error {:.2e} ({})", worst.0, worst.1),
    ))
}

fn debiasing() -> Result<Outcome> {
    let mut rng = restart_rng(SEED, 11);
    let alphas: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let mut bad = Vec::new();
    for trial in 0..100 {
        let n = 3 + trial % 10;
        let p = common::random_sparse(&mut rng, n, 0.3);
        bad.extend(common::debias_violations(&p, &alphas));
        bad.extend(common::walk_violations(&p, 6));
    }
    Ok(outcome(
        bad.is_empty(),
        format!("100 random matrices: stochastic rows, monotone entropy, exact uniform at α=1, monotone walk support; {} violations", bad.len()),
    ))
}

fn pipeline() -> Result<Outcome> {
    let start = Instant::now();
    let separable = ExperimentConfig::load(fixture("separable_blobs.json"))?;
    let first = run_in_memory(&separable)?;
    let second = run_in_memory(&separable)?;
    let acc = first.metrics.hungarian_accuracy.unwrap_or(0.0);
    let deterministic = first.metrics == second.metrics;

    let noisy = ExperimentConfig::load(fixture("noisy_blobs.json"))?;
    let seeds: Vec<u64> = (0..PIPELINE_SEEDS).collect();
    let rows = ablation_sweep(&noisy, &[0.0, 0.2, 0.4, 0.6, 0.8], &[1], &seeds, Sides::Both, None)?;
    let baseline = rows[0].hungarian_accuracy.unwrap_or(0.0);
    let best = rows[1..]
        .iter()
        .map(|r| (r.alpha, r.hungarian_accuracy.unwrap_or(0.0)))
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let elapsed = start.elapsed();
    let ok = acc == 1.0 && deterministic && best.1 >= baseline && elapsed < PIPELINE_BUDGET;
    Ok(outcome(
        ok,
        format!(
            "separable accuracy {acc} (rerun identical: {deterministic}); noisy sweep over {PIPELINE_SEEDS} seeds: α=0 {baseline:.4}, best α={} {:.4}; {elapsed:.2?}",
            best.0, best.1
        ),
    ))
}

fn hungarian() -> Result<Outcome> {
    let mut rng = restart_rng(SEED, 13);
    let mut mismatches = 0;
    for _ in 0..HUNGARIAN_TRIALS {
        let m = common::random_confusion(&mut rng, 5);
        if max_weight_matching(&m).0 != common::brute_force_matching(&m) {
            mismatches += 1;
        }
    }
    Ok(outcome(
        mismatches == 0,
        format!("{HUNGARIAN_TRIALS} random confusion matrices up to 5×5: {mismatches} mismatches against enumeration"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("theorem harness", theorem_harness),
        ("k-means identity", kmeans),
        ("triplet bounds", triplet),
        ("PCA recovery", pca),
        ("normalized cuts", ncut),
        ("gradient integrity", gradients),
        ("debiasing properties", debiasing),
        ("pipeline end-to-end", pipeline),
        ("Hungarian correctness", hungarian),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!("{} [{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
