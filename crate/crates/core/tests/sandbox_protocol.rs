//! The subprocess sandbox's stdin/stdout contract, exercised with shell
//! stand-ins for the driver.

use std::time::Duration;

use pairgen_core::eval::{
    load_problems, run_benchmark, BenchOptions, CanonicalGenerator, ExecPayload, Sandbox,
    SubprocessSandbox, VerdictStatus,
};

fn sh(script: &str) -> SubprocessSandbox {
    SubprocessSandbox::new(
        vec!["sh".into(), "-c".into(), script.into()],
        Duration::from_secs(2),
    )
}

fn problems() -> Vec<pairgen_core::eval::BenchmarkProblem> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/desk_problems.jsonl");
    load_problems(&path).unwrap()
}

#[test]
fn payload_is_one_json_document_on_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let captured = dir.path().join("payload.json");
    let sandbox = sh(&format!(
        "cat > '{}'; echo '{{\"status\":\"pass\",\"detail\":\"\",\"duration_ms\":3}}'",
        captured.display()
    ));
    let problem = &problems()[2];
    let verdict = sandbox.evaluate(problem, &problem.canonical_solution);
    assert!(verdict.is_pass(), "{verdict:?}");
    assert_eq!(verdict.duration(), Duration::from_millis(3));

    let payload: ExecPayload = serde_json::from_str(&std::fs::read_to_string(&captured).unwrap()).unwrap();
    assert_eq!(payload.entry_point, "scale_2");
    assert_eq!(payload.test_code, problem.test);
    assert_eq!(payload.timeout_s, 2.0);
    // body-only completions are joined with the prompt
    assert_eq!(payload.candidate_code, format!("{}{}", problem.prompt, problem.canonical_solution));
}

#[test]
fn driver_statuses_map_to_verdicts() {
    let problem = &problems()[0];
    for (status, expected) in [
        ("fail", VerdictStatus::Fail),
        ("timeout", VerdictStatus::Timeout),
        ("error", VerdictStatus::Error),
    ] {
        let sandbox = sh(&format!(
            "cat >/dev/null; echo '{{\"status\":\"{status}\",\"detail\":\"AssertionError\"}}'"
        ));
        let verdict = sandbox.evaluate(problem, "");
        assert_eq!(verdict.status(), expected);
        assert_eq!(verdict.detail(), "AssertionError");
    }
}

#[test]
fn silent_or_garbled_driver_is_an_error_verdict() {
    let problem = &problems()[0];
    for script in ["cat >/dev/null", "cat >/dev/null; echo not-json", "exit 3"] {
        let verdict = sh(script).evaluate(problem, "");
        assert_eq!(verdict.status(), VerdictStatus::Error, "{script}");
        assert!(!verdict.detail().is_empty());
    }
}

#[test]
fn benchmark_runs_through_subprocess_sandbox() {
    let sandbox = sh("cat >/dev/null; echo '{\"status\":\"pass\"}'");
    sandbox.probe().unwrap();
    let options = BenchOptions {
        n: 2,
        k_list: vec![1, 2],
        jobs: 4,
    };
    let report = run_benchmark(&problems(), &CanonicalGenerator, &sandbox, &options, None).unwrap();
    assert_eq!(report.value(1), Some(1.0));
    assert_eq!(report.value(2), Some(1.0));
    assert!(report.results.iter().all(|r| r.n() == 2));
}
