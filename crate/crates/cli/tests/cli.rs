use std::path::PathBuf;
use std::process::{Command, Output};

fn instance(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../instances")
        .join(format!("{name}.json"))
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lllsampler")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn check_reports_conditions() {
    let o = run(&["check", "--instance", &instance("sat_k6_pair")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for line in ["k=6", "degree=2", "weak=true", "strong=false", "parameters=accepted"] {
        assert!(text.lines().any(|l| l == line), "missing {line}:\n{text}");
    }
}

#[test]
fn check_reports_rejected_parameters() {
    let o = run(&["check", "--instance", &instance("sat_k6_pair"), "--params", "strong"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l.starts_with("parameters=rejected")));
}

#[test]
fn zero_samples_is_empty() {
    let o = run(&["sample", "--instance", &instance("sat_k6_pair"), "--samples", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn samples_satisfy_the_instance() {
    let path = instance("coloring_q3");
    let o = run(&["sample", "--instance", &path, "--samples", "200", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let f = lllsampler::parse_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let lines: Vec<&str> = std::str::from_utf8(&o.stdout).unwrap().lines().collect();
    assert_eq!(lines.len(), 200);
    for line in lines {
        let row: serde_json::Map<String, serde_json::Value> = serde_json::from_str(line).unwrap();
        assert_eq!(row.len(), f.num_vars());
        let values: Vec<u32> = (0..f.num_vars())
            .map(|v| {
                let label = row[f.variable(v).name.as_str()].as_str().unwrap();
                f.variable(v).labels.iter().position(|l| l == label).unwrap() as u32
            })
            .collect();
        assert!(f.first_violated(&values).is_none(), "{line}");
    }
}

#[test]
fn repeated_runs_are_identical() {
    let path = instance("tables_mixed");
    let args = ["sample", "--instance", &path, "--samples", "100", "--seed", "11"];
    let a = run(&args);
    let b = run(&args);
    let mut jobs = args.to_vec();
    jobs.extend(["--jobs", "2"]);
    let c = run(&jobs);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let other = run(&["sample", "--instance", &path, "--samples", "100", "--seed", "12"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn marginal_and_infer_report_distributions() {
    let path = instance("sat_k6_pair");
    let o = run(&["marginal", "--instance", &path, "--var", "x0", "--samples", "500"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["samples"], 500);

    let o = run(&["infer", "--instance", &path, "--var", "x0", "--epsilon", "0.3", "--delta", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["batches"], 1);
}

#[test]
fn dimacs_input_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.cnf");
    std::fs::write(&path, "c six-clause\np cnf 6 1\n1 2 3 4 5 6 0\n").unwrap();
    let o = run(&["sample", "--instance", path.to_str().unwrap(), "--samples", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn input_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"variables\": 3}").unwrap();
    let k6 = instance("sat_k6_pair");
    for args in [
        vec!["sample", "--instance", "/nonexistent/file.json"],
        vec!["sample", "--instance", bad.to_str().unwrap()],
        vec!["marginal", "--instance", &k6, "--var", "nope"],
        vec!["sample", "--instance", &k6, "--bogus-flag"],
        vec!["sample", "--instance", &k6, "--p-prime", "0.1"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn help_exits_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn condition_violations_exit_2() {
    let k6 = instance("sat_k6_pair");
    let o = run(&["sample", "--instance", &k6, "--params", "strong"]);
    assert_eq!(o.status.code(), Some(2));
    // a lone 2-clause is far outside the weak condition
    let o = run(&["sample", "--instance", &instance("clause_or"), "--params", "weak"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_goodness_of_fit_exits_3() {
    let o = run(&[
        "verify",
        "--instance",
        &instance("sat_k6_pair"),
        "--samples",
        "2000",
        "--significance",
        "0.9999999",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn verify_passes_on_golden() {
    let o = run(&["verify", "--instance", &instance("robust_sat_k8"), "--samples", "5000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn exhausted_budget_exits_4() {
    let o = run(&[
        "sample",
        "--instance",
        &instance("sat_k7_chain"),
        "--samples",
        "50",
        "--draw-budget",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
