use icon_core::equivalence::{run, run_all, TheoremId};

#[test]
fn every_registered_check_passes() {
    let reports = run_all(0).unwrap();
    assert_eq!(reports.len(), TheoremId::ALL.len());
    for r in &reports {
        println!(
            "{:<20} n={:<5} rel={:.3e} tol={:.1e} {} {:?}",
            r.id.name(),
            r.instances,
            r.max_rel_gap,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" },
            r.metrics
        );
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed).map(|r| (r.id, &r.notes)).collect();
    assert!(failed.is_empty(), "{failed:?}");
}

#[test]
fn reruns_reproduce_identical_gaps() {
    for id in [TheoremId::Sne, TheoremId::Triplet, TheoremId::Ncut] {
        assert_eq!(run(id, 5).unwrap(), run(id, 5).unwrap());
    }
}
