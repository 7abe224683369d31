use std::path::{Path, PathBuf};
use std::time::Instant;

use pairgen_core::backend::{http_requests_sent, ScriptedBackend, ScriptedTranscript};
use pairgen_core::orchestrator::{
    run_pipeline, AccumulatedCode, Orchestrator, Stage, MODULE_HEADER_PREFIX, RUN_REPORT_FILE, TRANSCRIPT_FILE,
};
use pairgen_core::prompt::TemplateSet;
use pairgen_core::types::{AgentMessage, AgentRole, Speaker};
use pairgen_core::{ProjectDescription, RunConfig};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn project() -> ProjectDescription {
    ProjectDescription::from_file(&fixture("two_module_project.txt")).unwrap()
}

fn config(out: &Path) -> RunConfig {
    RunConfig {
        output_dir: out.to_path_buf(),
        ..RunConfig::default()
    }
}

fn manager_reply(modules: usize) -> String {
    let body: Vec<String> = (1..=modules)
        .map(|i| {
            format!(
                r#""module_{i}": {{"Module Name": "mod_{i}", "Detailed Description": "part {i}", "Objective": "o", "Expected Inputs": "i", "Expected Outputs": "o"}}"#
            )
        })
        .collect();
    format!("{{{}}}", body.join(", "))
}

/// Every non-Manager reply carries fenced code, so each stage yields code.
fn synthetic_transcript(modules: usize, calls_per_module: usize) -> ScriptedTranscript {
    let mut replies = vec![manager_reply(modules)];
    for m in 1..=modules {
        for c in 0..calls_per_module {
            replies.push(format!("step {c}\n```python\nvalue_{m} = {c}\n```"));
        }
    }
    ScriptedTranscript::from_responses(replies)
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "py"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn two_module_fixture_is_deterministic() {
    let transcript = ScriptedTranscript::load(&fixture("two_module_transcript.json")).unwrap();
    let started = Instant::now();
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let backend = ScriptedBackend::new(transcript.clone(), 0);
        let outcome = run_pipeline(&project(), &config(dir.path()), &backend).unwrap();
        assert_eq!(backend.consumed(), 27);
        assert_eq!(backend.remaining(), 0);
        assert_eq!(outcome.files.len(), 2);

        let totals = outcome.report.totals();
        let rows = outcome.report.rows();
        assert_eq!(totals.module_count, rows.len());
        assert_eq!(totals.total_lines, rows.iter().map(|r| r.line_count).sum::<usize>());
        assert_eq!(totals.total_cost, rows.iter().map(|r| r.cost).sum::<f64>());
        assert_eq!(totals.total_minutes, rows.iter().map(|r| r.duration_minutes).sum::<f64>());

        assert!(dir.path().join(RUN_REPORT_FILE).is_file());
        let transcript_lines = std::fs::read_to_string(dir.path().join(TRANSCRIPT_FILE)).unwrap();
        assert_eq!(transcript_lines.lines().count(), 27);
        snapshots.push(dir_snapshot(dir.path()));
    }
    assert_eq!(snapshots[0], snapshots[1]);
    let names: Vec<_> = snapshots[0].iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["temperature_parser.py", "temperature_stats.py"]);
    let parser = String::from_utf8(snapshots[0][0].1.clone()).unwrap();
    assert!(parser.starts_with("\"\"\"temperature parser.\"\"\""));
    assert!(parser.ends_with("return rows\n"));
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn call_count_law_holds() {
    let before = http_requests_sent();
    for modules in 1..=3usize {
        for pair_rounds in 1..=3u32 {
            for finalize_rounds in 1..=3u32 {
                for verification in [true, false] {
                    let per_module = (2 * pair_rounds + u32::from(verification) + 2 * finalize_rounds) as usize;
                    let expected = 1 + modules * per_module;
                    let dir = tempfile::tempdir().unwrap();
                    let cfg = RunConfig {
                        pair_rounds,
                        finalize_rounds,
                        verification_enabled: verification,
                        ..config(dir.path())
                    };
                    let backend = ScriptedBackend::new(synthetic_transcript(modules, per_module), 0);
                    let orchestrator = Orchestrator::new(&cfg, TemplateSet::builtin(), &backend);
                    let outcome = orchestrator.run(&project()).unwrap();
                    assert_eq!(orchestrator.call_count(), expected, "M={modules} P={pair_rounds} F={finalize_rounds} V={verification}");
                    assert_eq!(backend.remaining(), 0);
                    assert_eq!(outcome.files.len(), modules);
                }
            }
        }
    }
    assert_eq!(http_requests_sent(), before, "scripted runs must not touch the network");
}

#[test]
fn pair_code_comes_from_last_fenced_reply() {
    // only the 4th pair reply (Dev_1, round 2) is fenced
    let mut replies = vec![manager_reply(1)];
    for i in 1..=6 {
        replies.push(if i == 4 {
            "```python\npicked = True\n```".to_string()
        } else {
            format!("discussion {i}")
        });
    }
    replies.push("looks fine".to_string());
    replies.extend((0..6).map(|i| format!("no change {i}")));
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let backend = ScriptedBackend::new(ScriptedTranscript::from_responses(replies), 0);
    let outcome = run_pipeline(&project(), &cfg, &backend).unwrap();
    // finalize produced no code, so the pair code was saved
    assert_eq!(std::fs::read_to_string(&outcome.files[0]).unwrap(), "picked = True\n");
}

#[test]
fn single_pair_round_makes_two_calls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        pair_rounds: 1,
        ..config(dir.path())
    };
    let backend = ScriptedBackend::new(synthetic_transcript(1, 9), 0);
    let orchestrator = Orchestrator::new(&cfg, TemplateSet::builtin(), &backend);
    orchestrator.run(&project()).unwrap();
    let pair_calls: Vec<_> = orchestrator
        .calls()
        .into_iter()
        .filter(|c| matches!(c.role, AgentRole::Dev1 | AgentRole::Dev2))
        .map(|c| c.role)
        .collect();
    assert_eq!(pair_calls, [AgentRole::Dev2, AgentRole::Dev1]);
}

#[test]
fn verification_disabled_uses_default_review() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        pair_rounds: 1,
        finalize_rounds: 1,
        verification_enabled: false,
        ..config(dir.path())
    };
    let backend = ScriptedBackend::new(synthetic_transcript(1, 4), 0);
    let orchestrator = Orchestrator::new(&cfg, TemplateSet::builtin(), &backend);
    orchestrator.run(&project()).unwrap();
    assert_eq!(orchestrator.call_count(), 5);
    assert!(orchestrator.calls().iter().all(|c| c.role != AgentRole::Verification));
}

#[test]
fn paired_histories_stay_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let backend = ScriptedBackend::new(synthetic_transcript(2, 13), 0);
    let outcome = Orchestrator::new(&cfg, TemplateSet::builtin(), &backend)
        .run(&project())
        .unwrap();
    let state = &outcome.state;
    for (a, b) in [
        (AgentRole::Dev1, AgentRole::Dev2),
        (AgentRole::Finalized1, AgentRole::Finalized2),
    ] {
        let (ha, hb) = (state.history(a).unwrap(), state.history(b).unwrap());
        assert_eq!(ha.len(), hb.len(), "{a} vs {b}");
        assert_eq!(ha.messages()[0].speaker, Speaker::System);
    }
}

#[test]
fn accumulated_code_grows_by_prefix() {
    let transcript = ScriptedTranscript::load(&fixture("two_module_transcript.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let backend = ScriptedBackend::new(transcript, 0);
    let outcome = run_pipeline(&project(), &config(dir.path()), &backend).unwrap();
    let acc = outcome.state.accumulated();
    let whole = acc.text();
    assert_eq!(acc.module_count(), 2);
    assert!(whole.starts_with(&format!("{MODULE_HEADER_PREFIX}temperature_parser")));
    let mut replay = AccumulatedCode::new();
    let mut previous = String::new();
    for module in outcome.state.completed() {
        replay.push(module.module_name(), module.code());
        assert!(replay.text().starts_with(&previous));
        previous = replay.text();
    }
    assert_eq!(previous, whole);
    for (module, code) in outcome.state.completed().iter().map(|m| (m.module_name(), m.code())) {
        assert!(whole.contains(&format!("{MODULE_HEADER_PREFIX}{module} ===\n{code}\n")));
    }
}

#[test]
fn second_module_prompt_sees_first_module_code() {
    let transcript = ScriptedTranscript::load(&fixture("two_module_transcript.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let backend = ScriptedBackend::new(transcript, 0);
    let outcome = run_pipeline(&project(), &config(dir.path()), &backend).unwrap();
    let dev1 = outcome.state.history(AgentRole::Dev1).unwrap();
    let system: &AgentMessage = &dev1.messages()[0];
    assert!(system.content.contains("def parse(text):"));
    assert!(system.content.contains("temperature_stats"));
}

#[test]
fn exhausted_transcript_reports_stage() {
    let dir = tempfile::tempdir().unwrap();
    let backend = ScriptedBackend::new(synthetic_transcript(1, 3), 0);
    let err = run_pipeline(&project(), &config(dir.path()), &backend).unwrap_err();
    assert_eq!(err.stage, Stage::PairProgramming);
    assert_eq!(err.module.as_deref(), Some("mod_1"));
}
