use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privfair")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn repro_counterexample_passes_and_detects_perturbation() {
    let ok = run(&["repro-counterexample"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = stdout(&ok);
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));

    let bad = run(&["repro-counterexample", "--mech", &fixture("counterexample/mech_x_perturbed.json")]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("l_bar_with_mechanism,1.3862943611198906,1.355"));

    let same = run(&["repro-counterexample", "--format", "json", "--mech", &fixture("counterexample/mech_x.json")]);
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(json(&same).as_array().unwrap().len(), 5);
}

#[test]
fn certify_reports_and_signals_through_exit_code() {
    let o = run(&[
        "certify",
        "--world",
        &fixture("worlds/screening.json"),
        "--utility",
        &fixture("worlds/screening_utility.json"),
        "--mech-a",
        &fixture("worlds/rr_group.json"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["holds"], true);
    assert_eq!(v["theorem"], "pure_dp_attribute_free");
    assert_eq!(v["delta"], 0.0);
    assert!((v["epsilon"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let world = dir.path().join("dependent.json");
    let mut w: Value = serde_json::from_str(&std::fs::read_to_string(fixture("worlds/screening.json")).unwrap()).unwrap();
    w["joint_xa"] = serde_json::json!([[0.5, 0.1], [0.0, 0.4]]);
    std::fs::write(&world, w.to_string()).unwrap();
    let o = run(&["certify", "--world", world.to_str().unwrap(), "--utility", &fixture("worlds/screening_utility.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["holds"], false);
    assert!(json(&o)["violation"].as_str().unwrap().contains("independent"));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let cases: [&[&str]; 6] = [
        &["certify", "--world", "/nonexistent/world.json", "--utility", "/nonexistent/g.json"],
        &["sweep", "--epsilons", "1,0.5", "--world", "w", "--utility", "g"],
        &["verify-dp", "--mech", "/nonexistent.json", "--eps", "1"],
        &["plan", "--mask", "m.txt", "--start", "1;2", "--goal", "3,4"],
        &["plan", "--mask", "m.txt", "--start", "1,2", "--goal", "3,4", "--conn", "6"],
        &["certify", "--format", "csv", "--world", "w", "--utility", "g"],
    ];
    for args in cases {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
    let o = run(&["simulate", "--scenario", &fixture("scenarios/package.toml"), "--mechanism", "rr:-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
}

#[test]
fn verify_dp_verdicts() {
    let mech = fixture("counterexample/mech_x.json");
    let pass = run(&["verify-dp", "--mech", &mech, "--eps", "1.0986123"]);
    assert_eq!(pass.status.code(), Some(0));
    assert_eq!(json(&pass)["passed"], true);
    let fail = run(&["verify-dp", "--mech", &mech, "--eps", "1.0"]);
    assert_eq!(fail.status.code(), Some(1));
    let w = &json(&fail)["witness"];
    assert_eq!((w["a"].as_str(), w["a_prime"].as_str()), (Some("1"), Some("0")));
    assert!((w["gap"].as_f64().unwrap() - (0.3 - std::f64::consts::E * 0.1)).abs() < 1e-12);
    let slack = run(&["verify-dp", "--mech", &mech, "--eps", "1.0", "--delta", "0.03"]);
    assert_eq!(slack.status.code(), Some(0));
}

#[test]
fn sweep_csv_is_deterministic_and_written_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        let mut v: Vec<String> = ["--seed", "7", "--out", out.to_str().unwrap(), "sweep", "--world"]
            .iter()
            .map(ToString::to_string)
            .collect();
        v.extend([
            fixture("worlds/screening.json"),
            "--utility".into(),
            fixture("worlds/screening_utility.json"),
            "--epsilons".into(),
            "0,0.5,1".into(),
            "--samples".into(),
            "2000".into(),
            "--resamples".into(),
            "100".into(),
        ]);
        v
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = Command::new(env!("CARGO_BIN_EXE_privfair")).args(args(p)).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
    }
    let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(ta, tb);
    let mut lines = ta.lines();
    assert_eq!(
        lines.next(),
        Some("epsilon_a,delta_a,l_exact,l_bar_exact,l_hat,l_hat_ci_low,l_hat_ci_high,l_bar_hat,bound,n_samples,epsilon_sum,odds")
    );
    assert_eq!(lines.count(), 3);

    let j = run(&[
        "--format",
        "json",
        "sweep",
        "--scenario",
        &fixture("scenarios/package_biased.toml"),
        "--epsilons",
        "0,1",
        "--samples",
        "300",
        "--resamples",
        "50",
    ]);
    assert_eq!(j.status.code(), Some(0));
    let rows = json(&j);
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert!(rows[0]["l_exact"].is_null());
    assert_eq!(rows[1]["epsilon_sum"], 1.0);
}

#[test]
fn simulate_trace_round_trips_to_the_same_summary() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let o = run(&[
        "--seed",
        "3",
        "simulate",
        "--scenario",
        &fixture("scenarios/hr_private.toml"),
        "--trials",
        "300",
        "--resamples",
        "100",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let again = run(&["simulate", "--from-trace", trace.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(json(&o), json(&again));
    let summary = json(&o);
    assert_eq!(summary["completed"], 300);
    let t: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(t["trials"].as_array().unwrap().len(), 300);
    assert_eq!(t["trials"][0]["raw"][0][0], serde_json::json!(["name", "Tom"]));
}

#[test]
fn plan_matches_between_cloud_and_mask() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(&["fixtures", "gen-corridor", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(gen.status.code(), Some(0));
    for f in ["scene.xyz", "mask.txt"] {
        assert_eq!(
            std::fs::read_to_string(dir.path().join(f)).unwrap(),
            std::fs::read_to_string(fixture(&format!("corridor/{f}"))).unwrap(),
            "{f}"
        );
    }
    let cloud = run(&["plan", "--cloud", &fixture("corridor/scene.xyz"), "--res", "0.1", "--start", "18,10", "--goal", "4,3"]);
    let mask = run(&["plan", "--mask", &fixture("corridor/mask.txt"), "--start", "18,10", "--goal", "4,3"]);
    assert_eq!(cloud.status.code(), Some(0));
    assert_eq!(json(&cloud), json(&mask));
    let p = json(&cloud);
    assert_eq!(p["cells"][0], serde_json::json!([18, 10]));
    assert_eq!(p["cells"].as_array().unwrap().last().unwrap(), &serde_json::json!([4, 3]));
    let other = json(&run(&["plan", "--mask", &fixture("corridor/mask.txt"), "--start", "18,10", "--goal", "4,17"]));
    assert_eq!(p["cost"], other["cost"]);

    let blocked = run(&["plan", "--mask", &fixture("corridor/mask.txt"), "--start", "18,10", "--goal", "0,0"]);
    assert_eq!(blocked.status.code(), Some(2));
}

#[test]
fn prop_suite_small_run() {
    let o = run(&["--seed", "5", "prop-suite", "--instances", "300"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["checks"].as_array().unwrap().len(), 7);
    assert!(v["first_failure"].is_null());
    let dep = run(&["--seed", "5", "prop-suite", "--instances", "100", "--inject-dependent"]);
    assert_eq!(dep.status.code(), Some(0));
    assert_eq!(json(&dep)["checks"][0]["hypothesis_violations"], 100);
}
