mod common;

use icon_core::loss::Direction;

#[test]
fn every_family_in_both_directions() {
    let mut families = std::collections::BTreeSet::new();
    for seed in [0, 1] {
        for case in common::cases(seed) {
            families.insert(common::family_of(&case.kernel.kernel));
            for direction in [Direction::Forward, Direction::Reverse] {
                let r = common::check(&case, direction, seed);
                assert!(
                    r.passed,
                    "{} {direction:?}: max rel error {:.3e} at {}",
                    case.name, r.max_rel_error, r.worst_coordinate
                );
            }
        }
    }
    assert_eq!(families.len(), 8);
}
