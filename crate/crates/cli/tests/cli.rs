use std::process::{Command, Output};

use calabi_core::verify::report::from_csv;
use calabi_core::verify::SEED_ENV;

fn calabi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calabi"))
        .args(args)
        .env_remove(SEED_ENV)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn spectrum_json_lists_the_eigenvalues() {
    let o = calabi(&["spectrum", "CP2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let eig: Vec<f64> = v[0]["checks"][0]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let expected = [0.0, 0.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 2.0];
    assert_eq!(eig.len(), expected.len());
    assert!(eig.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-9));
}

#[test]
fn split_of_s4_is_all_kernel() {
    let o = calabi(&["split", "S4", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let reports = from_csv(&stdout(&o)).unwrap();
    let dims: Vec<f64> = reports[0].checks[..2].iter().map(|c| c.value).collect();
    assert_eq!(dims, [6.0, 0.0]);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["spectrum", "Q7"][..],
        &["--order", "2", "split", "S2"],
        &["--trials", "0", "split", "S2"],
        &["--tol", "-1", "split", "S2"],
        &["refined-cpn", "0"],
        &["khavkine", "--omega", "tanh"],
        &["frobnicate"],
    ] {
        assert_eq!(calabi(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn failing_check_exits_1_and_names_it() {
    let o = calabi(&["khavkine", "--omega", "cosh", "--trials", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL khavkine [warped-cosh]: precondition"));
}

#[test]
fn complex_check_passes_on_the_counterexample_space() {
    let o = calabi(&["complex-check", "S2xS1", "--trials", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("complex [S2xS1]"));
}

#[test]
fn out_writes_a_file_and_bad_paths_exit_3() {
    let dir = std::env::temp_dir().join(format!("calabi-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("split.json");
    let o = calabi(&["split", "S2", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v[0]["suite"], "split");
    std::fs::remove_dir_all(&dir).unwrap();

    let bad = dir.join("missing").join("x.json");
    assert_eq!(calabi(&["split", "S2", "--out", bad.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn seed_comes_from_the_environment_unless_given() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_calabi"));
        c.args(["split", "S2", "--format", "json"]).args(extra).env_remove(SEED_ENV);
        if let Some(s) = env {
            c.env(SEED_ENV, s);
        }
        let v: serde_json::Value = serde_json::from_slice(&c.output().unwrap().stdout).unwrap();
        v[0]["seed"].as_u64().unwrap()
    };
    assert_eq!(run(Some("77"), &[]), 77);
    assert_eq!(run(Some("77"), &["--seed", "5"]), 5);
    assert_eq!(run(None, &[]), calabi_core::verify::DEFAULT_SEED);
}

#[test]
fn same_seed_same_report() {
    let a = calabi(&["complex-check", "CP1", "--trials", "3", "--seed", "9", "--format", "csv"]);
    let b = calabi(&["complex-check", "CP1", "--trials", "3", "--seed", "9", "--format", "csv"]);
    assert_eq!(a.stdout, b.stdout);
}
