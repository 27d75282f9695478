use fuznet::autodiff::BackwardFault;
use fuznet::verify::{gradcheck_suite, GRADCHECK_TOLERANCE};

#[test]
fn every_component_passes() {
    let checks = gradcheck_suite(BackwardFault::None, 0).unwrap();
    for c in &checks {
        println!(
            "{:<36} {:.3e} ({} entries)",
            c.name, c.max_rel_error, c.checked
        );
    }
    assert!(checks.len() >= 20);
    let failed: Vec<_> = checks
        .iter()
        .filter(|c| !c.passed(GRADCHECK_TOLERANCE))
        .collect();
    assert!(failed.is_empty(), "{failed:?}");
}

#[test]
fn broken_tanh_backward_is_caught() {
    let checks = gradcheck_suite(BackwardFault::TanhBackward, 0).unwrap();
    let first = checks
        .iter()
        .find(|c| !c.passed(GRADCHECK_TOLERANCE))
        .unwrap();
    assert_eq!(first.name, "elementwise.tanh");
    assert!(checks
        .iter()
        .find(|c| c.name == "elementwise.sigmoid")
        .unwrap()
        .passed(GRADCHECK_TOLERANCE));
}
