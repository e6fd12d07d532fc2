mod common;

use common::gradsuite::{block_cases, op_cases, worst, MAX_REL_ERR};

#[test]
fn op_gradients_match_central_differences() {
    for (name, case) in op_cases() {
        let err = worst(case);
        assert!(err <= MAX_REL_ERR, "{name}: max relative error {err:.3e}");
    }
}

#[test]
fn block_gradients_match_central_differences() {
    for (name, case) in block_cases() {
        let err = worst(case);
        assert!(err <= MAX_REL_ERR, "{name}: max relative error {err:.3e}");
    }
}

#[test]
fn checker_reports_nontrivial_coverage() {
    for (name, case) in op_cases().into_iter().chain(block_cases()) {
        let report = case(7);
        assert!(report.checked > 0, "{name}: nothing checked");
        println!("{name}: {} entries, max rel err {:.2e}", report.checked, worst(case));
    }
}
