//! Candidate evaluation.
//!
//! [`EchoOracleSandbox`] compares text against the canonical solution and needs
//! no interpreter. [`SubprocessSandbox`] hands each candidate to an external
//! driver process over a one-line JSON protocol:
//!
//! * stdin: `{"candidate_code","test_code","entry_point","timeout_s"}`
//! * stdout: one line `{"status","detail","duration_ms"}`

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::problems::BenchmarkProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Timeout,
    Error,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Pass => "pass",
            VerdictStatus::Fail => "fail",
            VerdictStatus::Timeout => "timeout",
            VerdictStatus::Error => "error",
        }
    }
}

/// Outcome of one candidate. `detail` is empty only for a pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    status: VerdictStatus,
    detail: String,
    duration: Duration,
}

impl Verdict {
    pub fn new(status: VerdictStatus, detail: impl Into<String>, duration: Duration) -> Self {
        let mut detail = detail.into();
        if status == VerdictStatus::Pass {
            detail.clear();
        } else if detail.trim().is_empty() {
            detail = status.as_str().to_string();
        }
        Self {
            status,
            detail,
            duration,
        }
    }

    pub fn pass(duration: Duration) -> Self {
        Self::new(VerdictStatus::Pass, "", duration)
    }

    pub fn error(detail: impl Into<String>) -> Self {
        Self::new(VerdictStatus::Error, detail, Duration::ZERO)
    }

    pub fn status(&self) -> VerdictStatus {
        self.status
    }

    pub fn detail(&self) -> &str {
        &self.detail
    }

    pub fn duration(&self) -> Duration {
        self.duration
    }

    pub fn is_pass(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

pub trait Sandbox: Send + Sync {
    /// Never fails: candidate defects and sandbox faults become verdicts.
    fn evaluate(&self, problem: &BenchmarkProblem, candidate_code: &str) -> Verdict;
}

pub fn evaluate_candidate(
    problem: &BenchmarkProblem,
    candidate_code: &str,
    sandbox: &dyn Sandbox,
) -> Verdict {
    sandbox.evaluate(problem, candidate_code)
}

fn normalize(code: &str) -> String {
    let unified = code.replace("\r\n", "\n").replace('\r', "\n");
    let mut lines: Vec<&str> = unified.lines().map(str::trim_end).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

/// Passes iff the candidate equals the canonical solution after stripping
/// trailing whitespace and unifying line endings.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoOracleSandbox;

impl Sandbox for EchoOracleSandbox {
    fn evaluate(&self, problem: &BenchmarkProblem, candidate_code: &str) -> Verdict {
        let started = Instant::now();
        if normalize(candidate_code) == normalize(&problem.canonical_solution) {
            Verdict::pass(started.elapsed())
        } else {
            Verdict::new(
                VerdictStatus::Fail,
                "candidate differs from canonical solution",
                started.elapsed(),
            )
        }
    }
}

/// Payload sent to the driver on stdin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecPayload {
    pub candidate_code: String,
    pub test_code: String,
    pub entry_point: String,
    pub timeout_s: f64,
}

/// Verdict line read from the driver's stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecVerdict {
    pub status: VerdictStatus,
    #[serde(default)]
    pub detail: String,
    #[serde(default)]
    pub duration_ms: u64,
}

/// Extra time the harness waits beyond the driver's own timeout and grace.
const HARNESS_SLACK: Duration = Duration::from_secs(5);
/// Driver-side teardown allowance beyond `timeout_s`.
pub const DRIVER_GRACE: Duration = Duration::from_millis(1000);

pub const SANDBOX_UNAVAILABLE: &str = "sandbox unavailable";

/// Runs each candidate through an external driver process.
#[derive(Debug, Clone)]
pub struct SubprocessSandbox {
    command: Vec<String>,
    timeout: Duration,
}

impl SubprocessSandbox {
    /// `command` is the program followed by its arguments.
    pub fn new(command: Vec<String>, timeout: Duration) -> Self {
        Self { command, timeout }
    }

    /// Command from `PAIRGEN_SANDBOX_DRIVER` (whitespace-split), falling back
    /// to `pairgen-sandbox-driver` on `PATH`.
    pub fn from_env(timeout: Duration) -> Self {
        let command = std::env::var("PAIRGEN_SANDBOX_DRIVER")
            .ok()
            .filter(|v| !v.trim().is_empty())
            .map(|v| v.split_whitespace().map(str::to_string).collect())
            .unwrap_or_else(|| vec!["pairgen-sandbox-driver".to_string()]);
        Self::new(command, timeout)
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    /// Program text handed to the driver. HumanEval completions are function
    /// bodies, so the prompt is prepended unless the candidate already
    /// defines the entry point.
    pub fn program_for(problem: &BenchmarkProblem, candidate_code: &str) -> String {
        let defines_entry = candidate_code.contains(&format!("def {}(", problem.entry_point));
        if defines_entry {
            candidate_code.to_string()
        } else {
            format!("{}{}", problem.prompt, candidate_code)
        }
    }

    /// Sends one payload and waits for the verdict line.
    pub fn execute(&self, payload: &ExecPayload) -> Result<ExecVerdict, String> {
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| SANDBOX_UNAVAILABLE.to_string())?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("{SANDBOX_UNAVAILABLE}: {e}"))?;

        let body = serde_json::to_vec(payload).expect("payload serializes");
        if let Some(mut stdin) = child.stdin.take() {
            // a driver that exits early closes its stdin; the verdict decides
            let _ = stdin.write_all(&body);
        }
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut out = String::new();
            let _ = stdout.read_to_string(&mut out);
            out
        });

        let deadline = Instant::now() + self.timeout + DRIVER_GRACE + HARNESS_SLACK;
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err("driver did not respond before the harness deadline".into());
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(format!("waiting for driver: {e}")),
            }
        }
        let out = reader.join().map_err(|_| "driver output reader panicked".to_string())?;
        let line = out
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| "driver emitted no verdict".to_string())?;
        serde_json::from_str(line).map_err(|e| format!("bad verdict line from driver: {e}"))
    }

    /// Checks that the driver starts and answers a trivial payload.
    pub fn probe(&self) -> Result<(), String> {
        self.execute(&ExecPayload {
            candidate_code: "def probe():\n    return 1\n".into(),
            test_code: "def check(candidate):\n    assert candidate() == 1\n".into(),
            entry_point: "probe".into(),
            timeout_s: 5.0,
        })
        .map(|_| ())
    }
}

impl Sandbox for SubprocessSandbox {
    fn evaluate(&self, problem: &BenchmarkProblem, candidate_code: &str) -> Verdict {
        let payload = ExecPayload {
            candidate_code: Self::program_for(problem, candidate_code),
            test_code: problem.test.clone(),
            entry_point: problem.entry_point.clone(),
            timeout_s: self.timeout.as_secs_f64(),
        };
        match self.execute(&payload) {
            Ok(verdict) => Verdict::new(
                verdict.status,
                verdict.detail,
                Duration::from_millis(verdict.duration_ms),
            ),
            Err(detail) => Verdict::error(detail),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> BenchmarkProblem {
        BenchmarkProblem {
            task_id: "t/0".into(),
            prompt: "def add(a, b):\n".into(),
            canonical_solution: "    return a + b\n".into(),
            test: "def check(c):\n    assert c(1, 2) == 3\n".into(),
            entry_point: "add".into(),
        }
    }

    #[test]
    fn echo_oracle_passes_canonical() {
        let p = problem();
        assert!(evaluate_candidate(&p, &p.canonical_solution, &EchoOracleSandbox).is_pass());
        assert!(evaluate_candidate(&p, "    return a + b   \r\n\r\n", &EchoOracleSandbox).is_pass());
    }

    #[test]
    fn echo_oracle_fails_other_text() {
        let p = problem();
        let verdict = evaluate_candidate(&p, "", &EchoOracleSandbox);
        assert_eq!(verdict.status(), VerdictStatus::Fail);
        assert!(!verdict.detail().is_empty());
        assert!(!evaluate_candidate(&p, "return a+b", &EchoOracleSandbox).is_pass());
    }

    #[test]
    fn verdict_detail_rule() {
        assert_eq!(Verdict::new(VerdictStatus::Pass, "ignored", Duration::ZERO).detail(), "");
        assert_eq!(Verdict::new(VerdictStatus::Timeout, "", Duration::ZERO).detail(), "timeout");
    }

    #[test]
    fn missing_driver_is_unavailable() {
        let sandbox = SubprocessSandbox::new(
            vec!["/nonexistent/pairgen-driver".into()],
            Duration::from_secs(1),
        );
        let verdict = sandbox.evaluate(&problem(), "    return a + b\n");
        assert_eq!(verdict.status(), VerdictStatus::Error);
        assert!(verdict.detail().starts_with(SANDBOX_UNAVAILABLE));
        assert!(sandbox.probe().is_err());
    }

    #[test]
    fn program_prepends_prompt_for_bodies() {
        let p = problem();
        assert_eq!(
            SubprocessSandbox::program_for(&p, "    return a + b\n"),
            "def add(a, b):\n    return a + b\n"
        );
        let full = "def add(a, b):\n    return b + a\n";
        assert_eq!(SubprocessSandbox::program_for(&p, full), full);
    }
}
