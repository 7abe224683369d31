use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pairgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairgen"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn path_str(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn passk_prints_six_decimals() {
    let out = pairgen(&["passk", "--n", "10", "--c", "3", "--k", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "0.916667\n");

    let out = pairgen(&["passk", "--n", "5", "--c", "3", "--k", "4"]);
    assert_eq!(stdout(&out), "1.000000\n");
}

#[test]
fn passk_domain_errors_exit_2() {
    let out = pairgen(&["passk", "--n", "3", "--c", "5", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).is_empty());
    assert_eq!(pairgen(&["passk", "--n", "3", "--c", "1", "--k", "4"]).status.code(), Some(2));
    assert_eq!(pairgen(&["passk", "--n", "3", "--c", "1"]).status.code(), Some(2));
    assert_eq!(pairgen(&["passk", "--n", "3", "--c", "1", "--k", "1", "--bogus"]).status.code(), Some(2));
}

#[test]
fn generate_with_scripted_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("project");
    let out = pairgen(&[
        "generate",
        "--project",
        &fixture("two_module_project.txt"),
        "--out",
        path_str(&out_dir),
        "--backend",
        "scripted",
        "--transcript",
        &fixture("two_module_transcript.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for file in ["temperature_parser.py", "temperature_stats.py", "run_report.json", "transcript.jsonl"] {
        assert!(out_dir.join(file).is_file(), "missing {file}");
    }
    assert!(stdout(&out).contains("temperature_stats"));
    assert!(stderr(&out).contains("[2/2] temperature_stats"));

    // a second run refuses to overwrite, then succeeds with --force
    let args = [
        "generate",
        "--project",
        &fixture("two_module_project.txt"),
        "--out",
        path_str(&out_dir),
        "--backend",
        "scripted",
        "--transcript",
        &fixture("two_module_transcript.json"),
    ];
    let again = pairgen(&args);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(pairgen(&forced).status.code(), Some(0));
}

#[test]
fn generate_validation_failures_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");

    let missing = pairgen(&[
        "generate",
        "--project",
        "missing.txt",
        "--out",
        path_str(&out_dir),
        "--backend",
        "scripted",
        "--transcript",
        &fixture("two_module_transcript.json"),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("missing.txt"));

    let no_transcript = pairgen(&[
        "generate",
        "--project",
        &fixture("two_module_project.txt"),
        "--out",
        path_str(&out_dir),
        "--backend",
        "scripted",
    ]);
    assert_eq!(no_transcript.status.code(), Some(2));
    assert!(stderr(&no_transcript).contains("--transcript"));

    // live backend with no API key in the environment
    let no_key = pairgen(&[
        "generate",
        "--project",
        &fixture("two_module_project.txt"),
        "--out",
        path_str(&out_dir),
    ]);
    assert_eq!(no_key.status.code(), Some(2));
    assert!(stderr(&no_key).contains("OPENAI_API_KEY"), "{}", stderr(&no_key));

    assert!(!out_dir.exists());
}

#[test]
fn generate_pipeline_failure_names_stage() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.json");
    std::fs::write(&short, r#"["{\"module_1\": {\"Module Name\": \"a\"}}", "only one reply"]"#).unwrap();
    let out = pairgen(&[
        "generate",
        "--project",
        &fixture("two_module_project.txt"),
        "--out",
        path_str(&dir.path().join("run")),
        "--backend",
        "scripted",
        "--transcript",
        path_str(&short),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("pair programming"), "{}", stderr(&out));
}

fn bench(out_dir: &Path, generator: &str, extra: &[&str]) -> Output {
    let problems = fixture("desk_problems.jsonl");
    let mut args = vec![
        "bench",
        "--problems",
        &problems,
        "--generator",
        generator,
        "--out",
        path_str(out_dir),
    ];
    args.extend_from_slice(extra);
    pairgen(&args)
}

fn report_value(out_dir: &Path, k: usize) -> f64 {
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    report["pass_at_k"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["k"] == k)
        .and_then(|e| e["value"].as_f64())
        .unwrap()
}

#[test]
fn bench_echo_sandbox() {
    let dir = tempfile::tempdir().unwrap();
    let canonical = dir.path().join("canonical");
    let out = bench(&canonical, "canonical", &["--n", "1", "--k", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(report_value(&canonical, 1), 1.0);
    assert!(stdout(&out).contains("100.0%"));
    let lines = std::fs::read_to_string(canonical.join("results.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 10);

    let empty = dir.path().join("empty");
    let out = bench(&empty, "empty", &["--jobs", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report_value(&empty, 1), 0.0);
}

#[test]
fn bench_resume_and_force() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("b");
    assert_eq!(bench(&out_dir, "canonical", &["--n", "2", "--k", "1,2"]).status.code(), Some(0));
    assert_eq!(bench(&out_dir, "canonical", &["--n", "2"]).status.code(), Some(2));

    let resumed = bench(&out_dir, "empty", &["--n", "2", "--k", "2,1", "--resume"]);
    assert_eq!(resumed.status.code(), Some(0));
    assert!(stderr(&resumed).contains("20 sample(s) already recorded"));
    // nothing was regenerated, so the canonical results stand
    assert_eq!(report_value(&out_dir, 2), 1.0);

    let forced = bench(&out_dir, "empty", &["--n", "2", "--force"]);
    assert_eq!(forced.status.code(), Some(0));
    assert_eq!(report_value(&out_dir, 1), 0.0);
}

#[test]
fn bench_validation_exits_2_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("nothing");
    assert_eq!(bench(&out_dir, "canonical", &["--k", "5", "--n", "1"]).status.code(), Some(2));
    assert_eq!(bench(&out_dir, "backend", &["--backend", "scripted"]).status.code(), Some(2));
    let out = pairgen(&["bench", "--problems", "nope.jsonl", "--generator", "empty", "--out", path_str(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn bench_unavailable_sandbox_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pairgen"))
        .args([
            "bench",
            "--problems",
            &fixture("desk_problems.jsonl"),
            "--generator",
            "canonical",
            "--sandbox",
            "subprocess",
            "--out",
            path_str(&dir.path().join("s")),
        ])
        .env("PAIRGEN_SANDBOX_DRIVER", "/nonexistent/driver")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sandbox unavailable"));
}

#[test]
fn bench_subprocess_sandbox_protocol() {
    // stand-in driver: a candidate passes iff it contains "return x *"
    let dir = tempfile::tempdir().unwrap();
    let driver = dir.path().join("driver.sh");
    std::fs::write(
        &driver,
        "#!/bin/sh\nif grep -q 'return x \\*'; then echo '{\"status\":\"pass\"}'; else echo '{\"status\":\"fail\",\"detail\":\"AssertionError\"}'; fi\n",
    )
    .unwrap();
    let driver_cmd = format!("sh {}", driver.display());
    for (generator, expected) in [("canonical", 1.0), ("empty", 0.0)] {
        let out_dir: PathBuf = dir.path().join(generator);
        let out = Command::new(env!("CARGO_BIN_EXE_pairgen"))
            .args([
                "bench",
                "--problems",
                &fixture("desk_problems.jsonl"),
                "--generator",
                generator,
                "--sandbox",
                "subprocess",
                "--out",
                path_str(&out_dir),
            ])
            .env("PAIRGEN_SANDBOX_DRIVER", &driver_cmd)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert_eq!(report_value(&out_dir, 1), expected);
    }
}

#[test]
fn manual_report() {
    let dir = tempfile::tempdir().unwrap();
    let records: String = (1..=20)
        .map(|i| format!("{{\"description_id\":\"D{i}\",\"passed\":{}}}\n", i <= 17))
        .collect();
    let path = dir.path().join("manual.jsonl");
    std::fs::write(&path, records).unwrap();
    let out = pairgen(&["report", "--manual", path_str(&path)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("85.0%"));

    let all: String = (1..=5)
        .map(|i| format!("{{\"description_id\":\"P{i}\",\"passed\":true}}\n"))
        .collect();
    std::fs::write(&path, all).unwrap();
    assert!(stdout(&pairgen(&["report", "--manual", path_str(&path)])).contains("100.0%"));

    std::fs::write(&path, "").unwrap();
    assert_eq!(pairgen(&["report", "--manual", path_str(&path)]).status.code(), Some(2));
}
