use calabi_core::models::WarpFunction;
use calabi_core::verify::report::{from_csv, from_json, to_csv, to_json};
use calabi_core::verify::{
    suite_complex, suite_cpn_refined, suite_identities, suite_khavkine, suite_split, suite_spectrum, RunConfig,
};
use calabi_core::Error;

fn cfg(seed: u64, trials: usize) -> RunConfig {
    RunConfig {
        order: 6,
        tol: None,
        seed,
        trials,
    }
}

#[test]
fn reports_are_deterministic_per_seed() {
    let a = suite_complex("CP2", &cfg(3, 4)).unwrap();
    let b = suite_complex("CP2", &cfg(3, 4)).unwrap();
    assert_eq!(to_json(std::slice::from_ref(&a)).unwrap(), to_json(&[b]).unwrap());
    let c = suite_complex("CP2", &cfg(4, 4)).unwrap();
    assert_ne!(a.checks[0].value, c.checks[0].value);
}

#[test]
fn every_suite_ends_with_a_failing_perturbation_that_is_caught() {
    let c = cfg(11, 3);
    let reports = [
        suite_complex("S2xS2", &c).unwrap(),
        suite_identities("warped-exp-half-square", &c).unwrap(),
        suite_khavkine(WarpFunction::ExpHalfSquare, &c).unwrap(),
        suite_cpn_refined(1, &c).unwrap(),
    ];
    for r in &reports {
        let control = r.checks.last().unwrap();
        assert!(control.name.starts_with("negative control"), "{}", r.suite);
        assert!(control.pass && control.value > control.tol, "{}: {control:?}", r.suite);
    }
}

#[test]
fn complex_property_holds_where_exactness_fails() {
    let r = suite_complex("S2xS1", &cfg(1, 3)).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn flat_specs_check_the_calabi_operator_itself() {
    let r = suite_complex("R3", &cfg(1, 2)).unwrap();
    assert!(r.pass);
    assert!(r.checks[0].name.starts_with("C∘K"));
}

#[test]
fn spectrum_and_split_of_cp2() {
    let s = suite_spectrum("CP2", &cfg(0, 1)).unwrap();
    assert!(s.pass);
    let eig = &s.checks[0].values;
    let expected = [0.0, 0.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 2.0];
    assert_eq!(eig.len(), expected.len());
    for (a, b) in eig.iter().zip(expected) {
        assert!((a - b).abs() < 1e-9);
    }
    let split = suite_split("CP2", &cfg(0, 1)).unwrap();
    assert_eq!((split.checks[0].value, split.checks[1].value), (4.0, 2.0));
}

#[test]
fn sphere_split_has_no_complement() {
    let split = suite_split("S4", &cfg(0, 1)).unwrap();
    assert_eq!((split.checks[0].value, split.checks[1].value), (6.0, 0.0));
}

#[test]
fn singular_warps_report_the_precondition() {
    for omega in [WarpFunction::Cosh, WarpFunction::One] {
        let r = suite_khavkine(omega, &cfg(2, 2)).unwrap();
        assert!(!r.pass);
        let failing: Vec<_> = r.failures().collect();
        assert_eq!(failing.len(), 1);
        assert!(failing[0].name.starts_with("precondition"));
    }
}

#[test]
fn tolerance_override_replaces_residual_tolerances() {
    let mut c = cfg(5, 2);
    c.tol = Some(1e-30);
    let r = suite_cpn_refined(1, &c).unwrap();
    assert!(r.checks.iter().all(|k| k.tol == 1e-30));
    assert!(!r.pass);
}

#[test]
fn order_cap_below_the_need_is_an_error() {
    let mut c = cfg(5, 2);
    c.order = 4;
    assert!(matches!(
        suite_khavkine(WarpFunction::ExpHalfSquare, &c),
        Err(Error::InsufficientOrder { need: 5, .. })
    ));
}

#[test]
fn reports_round_trip_through_json_and_csv() {
    let reports = vec![
        suite_spectrum("CP3", &cfg(9, 1)).unwrap(),
        suite_identities("S2", &cfg(9, 2)).unwrap(),
    ];
    assert_eq!(from_json(&to_json(&reports).unwrap()).unwrap(), reports);
    assert_eq!(from_csv(&to_csv(&reports).unwrap()).unwrap(), reports);
}
