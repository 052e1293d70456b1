mod common;

use common::grads::{model_error, primitive_errors, MODEL_TOL};

#[test]
fn every_primitive_matches_central_differences() {
    let reports = primitive_errors().unwrap();
    assert!(reports.len() >= 20);
    for (name, r) in reports {
        assert!(r.passes(), "{name}: {r:?}");
    }
}

#[test]
fn full_model_matches_central_differences() {
    for seed in [1, 2, 3] {
        let err = model_error(10, seed).unwrap();
        assert!(err < MODEL_TOL, "seed {seed}: relative error {err:e}");
    }
}
