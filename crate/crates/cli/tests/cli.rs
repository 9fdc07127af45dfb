use std::process::{Command, Output};

fn cylsle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cylsle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn prob_grid_rows_sum_to_one() {
    let out = cylsle(&["prob", "--bc", "dd", "--mu", "0", "--p", "3.14159265", "--grid", "199"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,alpha,beta,gamma"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 199);
    for row in rows {
        let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(v.len(), 4);
        assert!((v[1] + v[2] + v[3] - 1.0).abs() <= 1e-12, "{row}");
    }
}

#[test]
fn prob_single_point_matches_library() {
    let out = cylsle(&["prob", "--bc", "dn", "--p", "3.14159265", "--x", "1.5707963"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
    let t = cylsle::probabilities::dn_probabilities(1.5707963, 3.14159265).unwrap();
    assert_eq!(v[1], t.alpha);
    assert_eq!(v[2], t.beta);
    assert_eq!(v[3], t.gamma);
}

#[test]
fn su2_at_identity_matches_dn_byte_for_byte() {
    let common = ["--p", "2.5", "--grid", "17"];
    let mut dn = vec!["prob", "--bc", "dn"];
    dn.extend_from_slice(&common);
    let mut su2 = vec![
        "prob", "--bc", "su2", "--a-re", "0", "--a-im", "0", "--b-re", "1", "--b-im", "0",
    ];
    su2.extend_from_slice(&common);
    let a = cylsle(&dn);
    let b = cylsle(&su2);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn mu_lambda_is_mu_in_lambda_units() {
    let lambda = std::f64::consts::PI / std::f64::consts::SQRT_2;
    let mu = format!("{}", 0.5 * lambda);
    let a = cylsle(&["prob", "--bc", "dd", "--mu", &mu, "--p", "2", "--x", "3"]);
    let b = cylsle(&["prob", "--bc", "dd", "--mu-lambda", "0.5", "--p", "2", "--x", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let both = cylsle(&["prob", "--bc", "dd", "--mu", "0", "--mu-lambda", "0", "--p", "2", "--x", "3"]);
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn mc_report_schema_and_verdict() {
    let out = cylsle(&[
        "mc", "--bc", "dn", "--p", "3.14159265", "--x", "1.5707963", "--paths", "2000", "--dt",
        "2e-3", "--seed", "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["estimate", "stderr", "closed_form", "z_scores", "n_paths", "dt0", "seed", "wall_time"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["n_paths"], 2000);
    assert_eq!(v["estimate"].as_array().unwrap().len(), 3);
}

#[test]
fn trace_constant_driver_is_a_vertical_slit() {
    let out = cylsle(&["trace", "--w0", "2.0", "--p", "2", "--grid", "10"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,re,im"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - 2.0).abs() <= 1e-3, "{row}");
        assert!(v[2] > 0.0);
    }
}

#[test]
fn trace_seeded_runs_are_byte_identical() {
    let args = ["trace", "--bc", "dn", "--p", "3.0", "--x", "3.0", "--grid", "25", "--seed", "3"];
    let a = cylsle(&args);
    let b = cylsle(&args);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn check_passes_and_mutation_trips_it() {
    let ok = cylsle(&["check", "--format", "json"]);
    assert_eq!(ok.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&ok)).unwrap();
    for item in v.as_array().unwrap() {
        assert!(item["passed"].as_bool().unwrap(), "{item}");
        assert!(item.get("name").is_some() && item.get("detail").is_some());
    }

    let bad = cylsle(&["check", "--format", "json", "--perturb", "1e-3"]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn spec_file_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("run.json");
    std::fs::write(
        &spec,
        r#"{"bc": "dd", "mu": 0.4, "p": 2.0, "grid": 9}"#,
    )
    .unwrap();
    let from_file = cylsle(&["prob", "--spec", spec.to_str().unwrap()]);
    let from_flags = cylsle(&["prob", "--bc", "dd", "--mu", "0.4", "--p", "2.0", "--grid", "9"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, from_flags.stdout);

    // explicit flags override file values
    let overridden = cylsle(&["prob", "--spec", spec.to_str().unwrap(), "--mu", "0"]);
    let direct = cylsle(&["prob", "--bc", "dd", "--mu", "0", "--p", "2.0", "--grid", "9"]);
    assert_eq!(overridden.stdout, direct.stdout);
}

#[test]
fn output_file_equals_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let piped = cylsle(&["prob", "--bc", "dn", "--p", "1.5", "--grid", "11"]);
    let to_file = cylsle(&[
        "prob", "--bc", "dn", "--p", "1.5", "--grid", "11", "--out", path.to_str().unwrap(),
    ]);
    assert!(to_file.status.success());
    assert_eq!(std::fs::read(&path).unwrap(), piped.stdout);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cylsle(&["prob", "--bc", "dd", "--grid", "5"]).status.code(), Some(2)); // no --p
    assert_eq!(cylsle(&["prob", "--bc", "dd", "--p", "2"]).status.code(), Some(2)); // no --x/--grid
    assert_eq!(cylsle(&["prob", "--bc", "bogus", "--p", "2", "--x", "1"]).status.code(), Some(2));
    assert_eq!(cylsle(&["prob", "--bc", "dd", "--p", "2", "--x", "9"]).status.code(), Some(2)); // x outside
    assert_eq!(cylsle(&["prob", "--no-such-flag"]).status.code(), Some(2)); // clap error
    assert_eq!(
        cylsle(&["prob", "--bc", "su2", "--a-re", "0.9", "--a-im", "0.9", "--b-re", "0", "--b-im", "0", "--p", "2", "--x", "1"])
            .status
            .code(),
        Some(2) // not an SU(2) matrix
    );
}

#[test]
fn numeric_failure_exits_1() {
    // modulus small enough that the closed forms underflow/degenerate is hard
    // to trigger; an impossible simulation budget is the reliable numeric path
    let out = cylsle(&["mc", "--bc", "dd", "--p", "2", "--paths", "50"]);
    assert_eq!(out.status.code(), Some(1));
}
