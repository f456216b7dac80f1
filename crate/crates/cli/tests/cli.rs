use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;

fn aqc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aqc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("AQC_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn symmetric_gradient_is_elliptic_with_constant_rank() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(&["check-operator", "--builtin", "symmetric_gradient"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["elliptic"], true);
    assert_eq!(r["constant_rank"], true);
    assert!(stdout(&o).contains("elliptic: true (min σ = "));
    assert!(dir.path().join("metadata.json").exists());
}

#[test]
fn one_dimensional_tracefree_gradient_fails_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(&["check-operator", "--builtin", "tracefree_symmetric_gradient:1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("elliptic: false"));
    assert!(text.contains("witness: xi' = [1.000000]"));
    assert!(text.contains("v = [1.000000]"));
}

#[test]
fn exactness_of_gradient_and_curl() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(&["check-operator", "--builtin", "gradient:3:1", "--annihilator", "curl:3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["exactness"]["exact"], true);
    assert_eq!(r["exactness"]["samples"], 4096);
}

#[test]
fn counterexample_produces_a_monotone_ratio_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(
        &["counterexample", "--builtin", "divergence-potential-curl", "--psi", "power:2", "--imax", "6"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    assert_eq!(r["ratios_increasing"], true);
    assert_eq!(r["rhs_decreasing"], true);
    assert!(r["growth"].as_f64().unwrap() >= 10.0);
    let tsv = std::fs::read_to_string(dir.path().join("counterexample.tsv")).unwrap();
    assert_eq!(tsv.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn counterexample_on_an_elliptic_operator_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(&["counterexample", "--builtin", "symmetric_gradient", "--imax", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("elliptic"));
}

#[test]
fn korn_ratio_for_the_symmetric_gradient_is_at_most_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(&["korn", "--builtin", "symmetric_gradient", "--psi", "power:2", "--fields", "100"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path());
    let max = r["max_ratio"].as_f64().unwrap();
    assert!((1.0..=2.0 + 1e-6).contains(&max), "{max}");
    let tsv = std::fs::read_to_string(dir.path().join("korn_ratios.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 101);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["korn", "--builtin", "div_curl", "--psi", "power:1.5", "--grid", "16", "--fields", "5", "--seed", "9"];
    let o = aqc(&args, a.path());
    assert_eq!(o.status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_aqc"))
        .args(args)
        .arg("--out")
        .arg(b.path())
        .env("AQC_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(b.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["threads"], 1);
    assert!(meta["started_unix"].as_f64().unwrap() > 0.0);
}

#[test]
fn different_seeds_give_different_samples() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = ["korn", "--builtin", "symmetric_gradient", "--grid", "16", "--fields", "3"];
    aqc(&[&base[..], &["--seed", "1"]].concat(), a.path());
    aqc(&[&base[..], &["--seed", "2"]].concat(), b.path());
    assert_ne!(report(a.path())["max_ratio"], report(b.path())["max_ratio"]);
}

#[test]
fn quasiconvexity_verdicts_set_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(&["quasiconvexity", "--builtin", "symmetric_gradient", "--integrand", "vp:2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(dir.path())["verdict"], "consistent-with");

    let o = aqc(&["quasiconvexity", "--builtin", "symmetric_gradient", "--integrand", "concave_quadratic"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "violates");
    assert!(r["quasiconvexity"]["witness"]["z"].is_array());
}

#[test]
fn minimize_writes_the_minimizer_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    std::fs::write(
        &problem,
        r#"{
  "operator": "symmetric_gradient:2",
  "integrand": {"kind": "vp", "p": 2.0},
  "domain": {"type": "dirichlet", "shape": [32, 32], "datum": {"kind": "sinusoidal", "amplitude": 1.0, "frequency": 1.0}}
}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = aqc(&["minimize", "--problem", problem.to_str().unwrap(), "--fields", "10"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["converged"], true);
    assert_eq!(r["local_minimality"]["passed"], true);
    assert_eq!(r["regularity"]["singular_fraction"], 0.0);
    let field = aqc_core::Field::load(out.join("minimizer.aqcf")).unwrap();
    assert_eq!(field.shape(), &[32, 32]);
    let trace = std::fs::read_to_string(out.join("trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), r["trace_length"].as_u64().unwrap() as usize + 1);
}

#[test]
fn render_reproduces_the_printed_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(&["check-operator", "--builtin", "curl:3"], dir.path());
    let rendered = Command::new(env!("CARGO_BIN_EXE_aqc"))
        .arg("render")
        .arg(dir.path().join("report.json"))
        .output()
        .unwrap();
    assert_eq!(rendered.status.code(), Some(0));
    assert_eq!(stdout(&rendered), stdout(&o));
}

#[test]
fn json_flag_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = aqc(&["check-operator", "--builtin", "div_curl", "--json"], dir.path());
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, report(dir.path()));
}

#[test]
fn empty_report_fails_to_render() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    std::fs::write(&path, "{}").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_aqc")).arg("render").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty report"));
}

#[test]
fn malformed_operator_files_report_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.json");
    std::fs::write(&path, "{\n  \"name\": \"broken\",\n  \"n\": 2,,\n}").unwrap();
    let o = aqc(&["check-operator", "--operator", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn operator_files_round_trip_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.json");
    std::fs::write(&path, aqc_core::operators::builtin::<f64>("symmetric_gradient:3").unwrap().to_json()).unwrap();
    let o = aqc(&["check-operator", "--operator", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(dir.path())["elliptic"], true);
}

#[test]
fn usage_and_lookup_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["check-operator"],
        vec!["check-operator", "--builtin", "nope"],
        vec!["check-operator", "--builtin", "curl", "--operator", "x.json"],
        vec!["korn", "--builtin", "symmetric_gradient", "--psi", "bogus"],
        vec!["minimize", "--problem", "/nonexistent/problem.json"],
        vec!["frobnicate"],
    ] {
        let o = aqc(&args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_aqc"))
        .args(["check-operator", "--builtin", "div_curl", "--out"])
        .arg(dir.path())
        .env("AQC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn malformed_inputs_never_crash(text in "[ -~\n]{0,80}", which in 0usize..3) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("input.json");
        std::fs::write(&path, &text).unwrap();
        let p = path.to_str().unwrap();
        let o = match which {
            0 => aqc(&["check-operator", "--operator", p], dir.path()),
            1 => aqc(&["minimize", "--problem", p], dir.path()),
            _ => Command::new(env!("CARGO_BIN_EXE_aqc")).args(["render", p]).output().unwrap(),
        };
        prop_assert_eq!(o.status.code(), Some(1));
    }

    #[test]
    fn truncated_reports_fail_cleanly(cut in 1usize..400) {
        let dir = tempfile::tempdir().unwrap();
        aqc(&["check-operator", "--builtin", "curl:3"], dir.path());
        let full = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let path = dir.path().join("cut.json");
        std::fs::write(&path, &full[..cut.min(full.len() - 1)]).unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_aqc")).args(["render"]).arg(&path).output().unwrap();
        prop_assert_eq!(o.status.code(), Some(1));
    }
}
