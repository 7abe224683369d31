use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::passk::aggregate_pass_at_k;
use super::problems::BenchmarkProblem;
use super::sandbox::{Sandbox, Verdict, VerdictStatus};
use super::EvalError;
use crate::backend::{ChatBackend, ChatRequest};
use crate::config::RunConfig;
use crate::orchestrator::{extract_code, run_pipeline};
use crate::types::{AgentMessage, ProjectDescription};

/// Produces one candidate completion per call.
pub trait Generator: Send + Sync {
    fn label(&self) -> String;
    fn generate(&self, problem: &BenchmarkProblem, sample_index: usize) -> Result<String, String>;
}

/// Emits the canonical solution; every sample should pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalGenerator;

impl Generator for CanonicalGenerator {
    fn label(&self) -> String {
        "canonical".into()
    }

    fn generate(&self, problem: &BenchmarkProblem, _: usize) -> Result<String, String> {
        Ok(problem.canonical_solution.clone())
    }
}

/// Emits empty text; every sample should fail.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyGenerator;

impl Generator for EmptyGenerator {
    fn label(&self) -> String {
        "empty".into()
    }

    fn generate(&self, _: &BenchmarkProblem, _: usize) -> Result<String, String> {
        Ok(String::new())
    }
}

const SINGLE_SHOT_SYSTEM: &str = "You are a senior python developer. Complete the Python function \
given by the user. Reply with the complete function in a single ```python fenced code block.";

/// One completion call per sample.
pub struct BackendGenerator<'a> {
    backend: &'a dyn ChatBackend,
    config: RunConfig,
}

impl<'a> BackendGenerator<'a> {
    pub fn new(backend: &'a dyn ChatBackend, config: RunConfig) -> Self {
        Self { backend, config }
    }
}

impl Generator for BackendGenerator<'_> {
    fn label(&self) -> String {
        format!("backend:{}", self.config.model_id)
    }

    fn generate(&self, problem: &BenchmarkProblem, _: usize) -> Result<String, String> {
        let request = ChatRequest::from_config(
            &self.config,
            vec![
                AgentMessage::system(SINGLE_SHOT_SYSTEM),
                AgentMessage::user(&problem.prompt),
            ],
        )
        .map_err(|e| e.to_string())?;
        let response = self.backend.complete(&request).map_err(|e| e.to_string())?;
        Ok(extract_code(&response.content).unwrap_or(response.content))
    }
}

/// Runs the full multi-agent pipeline per sample, with the problem prompt as
/// the project description. The candidate is the concatenated finalized code.
pub struct PipelineGenerator<'a> {
    backend: &'a dyn ChatBackend,
    config: RunConfig,
    scratch_root: PathBuf,
}

impl<'a> PipelineGenerator<'a> {
    /// Generated module files go under `scratch_root/<task>/<sample>/`.
    pub fn new(backend: &'a dyn ChatBackend, config: RunConfig, scratch_root: PathBuf) -> Self {
        Self {
            backend,
            config,
            scratch_root,
        }
    }
}

impl Generator for PipelineGenerator<'_> {
    fn label(&self) -> String {
        format!("pipeline:{}", self.config.model_id)
    }

    fn generate(&self, problem: &BenchmarkProblem, sample_index: usize) -> Result<String, String> {
        let task_dir: String = problem
            .task_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let mut config = self.config.clone();
        config.output_dir = self
            .scratch_root
            .join(task_dir)
            .join(sample_index.to_string());
        let description = format!(
            "Implement the following Python function exactly as specified, as a single module.\n\n{}",
            problem.prompt
        );
        let project = ProjectDescription::new(description, problem.task_id.clone())
            .map_err(|e| e.to_string())?;
        let outcome = run_pipeline(&project, &config, self.backend).map_err(|e| e.to_string())?;
        Ok(outcome
            .state
            .completed()
            .iter()
            .map(|m| m.code())
            .collect::<Vec<_>>()
            .join("\n\n"))
    }
}

/// All sample verdicts for one problem. `c` is always recounted from the
/// verdicts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemResult {
    task_id: String,
    verdicts: Vec<Verdict>,
}

impl ProblemResult {
    pub fn new(task_id: impl Into<String>, verdicts: Vec<Verdict>) -> Self {
        Self {
            task_id: task_id.into(),
            verdicts,
        }
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn n(&self) -> usize {
        self.verdicts.len()
    }

    pub fn c(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_pass()).count()
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }
}

/// Mean pass@k over problem results.
pub fn aggregate_results(results: &[ProblemResult], k: usize) -> Result<f64, EvalError> {
    aggregate_pass_at_k(results.iter().map(|r| (r.task_id(), r.n(), r.c())), k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub generator: String,
    pub n: usize,
    /// `(k, pass@k)` in ascending `k`.
    pub pass_at_k: Vec<(usize, f64)>,
    pub results: Vec<ProblemResult>,
}

impl BenchReport {
    pub fn from_results(
        generator: impl Into<String>,
        n: usize,
        k_list: &[usize],
        results: Vec<ProblemResult>,
    ) -> Result<Self, EvalError> {
        let mut ks = k_list.to_vec();
        ks.sort_unstable();
        ks.dedup();
        let pass_at_k = ks
            .into_iter()
            .map(|k| Ok((k, aggregate_results(&results, k)?)))
            .collect::<Result<_, EvalError>>()?;
        Ok(Self {
            generator: generator.into(),
            n,
            pass_at_k,
            results,
        })
    }

    pub fn value(&self, k: usize) -> Option<f64> {
        self.pass_at_k.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }
}

/// One line of the results JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub task_id: String,
    pub sample_index: usize,
    pub status: VerdictStatus,
    pub duration_ms: u64,
}

const RESUMED_DETAIL: &str = "recorded in an earlier run";

/// Append-only results file. Records already present are reused, so an
/// interrupted benchmark picks up where it stopped.
pub struct ResultSink {
    path: PathBuf,
    file: Mutex<File>,
    previous: HashMap<(String, usize), ResultRecord>,
}

impl ResultSink {
    pub fn open(path: &Path) -> Result<Self, EvalError> {
        let io_err = |source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut previous = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(io_err)?;
            for (index, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<ResultRecord>(line) {
                    Ok(record) => {
                        previous.insert((record.task_id.clone(), record.sample_index), record);
                    }
                    // a crash can leave a torn last line
                    Err(e) => tracing::warn!(line = index + 1, "skipping unreadable result record: {e}"),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: Mutex::new(file),
            previous,
        })
    }

    pub fn resumed_count(&self) -> usize {
        self.previous.len()
    }

    fn previous(&self, task_id: &str, sample_index: usize) -> Option<Verdict> {
        self.previous
            .get(&(task_id.to_string(), sample_index))
            .map(|r| Verdict::new(r.status, RESUMED_DETAIL, Duration::from_millis(r.duration_ms)))
    }

    fn append(&self, record: &ResultRecord) -> Result<(), EvalError> {
        let line = serde_json::to_string(record).expect("record serializes");
        let mut file = self.file.lock().expect("result sink lock");
        writeln!(file, "{line}").map_err(|source| EvalError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchOptions {
    /// Samples per problem.
    pub n: usize,
    pub k_list: Vec<usize>,
    /// Problems evaluated concurrently.
    pub jobs: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            n: 1,
            k_list: vec![1],
            jobs: 1,
        }
    }
}

fn run_problem(
    problem: &BenchmarkProblem,
    generator: &dyn Generator,
    sandbox: &dyn Sandbox,
    n: usize,
    sink: Option<&ResultSink>,
) -> Result<ProblemResult, EvalError> {
    let mut verdicts = Vec::with_capacity(n);
    for sample_index in 0..n {
        if let Some(verdict) = sink.and_then(|s| s.previous(&problem.task_id, sample_index)) {
            verdicts.push(verdict);
            continue;
        }
        let verdict = match generator.generate(problem, sample_index) {
            Ok(candidate) => sandbox.evaluate(problem, &candidate),
            Err(e) => Verdict::error(format!("generator failed: {e}")),
        };
        if let Some(sink) = sink {
            sink.append(&ResultRecord {
                task_id: problem.task_id.clone(),
                sample_index,
                status: verdict.status(),
                duration_ms: verdict.duration().as_millis() as u64,
            })?;
        }
        verdicts.push(verdict);
    }
    Ok(ProblemResult::new(&problem.task_id, verdicts))
}

/// Generates `n` candidates per problem, evaluates each, and aggregates
/// pass@k for every requested `k`.
pub fn run_benchmark(
    problems: &[BenchmarkProblem],
    generator: &dyn Generator,
    sandbox: &dyn Sandbox,
    options: &BenchOptions,
    sink: Option<&ResultSink>,
) -> Result<BenchReport, EvalError> {
    if options.k_list.is_empty() {
        return Err(EvalError::EmptyKList);
    }
    let max_k = options.k_list.iter().copied().max().unwrap_or(1);
    if max_k > options.n || options.k_list.contains(&0) {
        return Err(EvalError::KExceedsSamples {
            k: max_k,
            n: options.n,
        });
    }
    if problems.is_empty() {
        return Err(EvalError::EmptyResults);
    }

    let slots: Vec<Mutex<Option<Result<ProblemResult, EvalError>>>> =
        problems.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.jobs.clamp(1, problems.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                let Some(problem) = problems.get(index) else {
                    break;
                };
                let result = run_problem(problem, generator, sandbox, options.n, sink);
                *slots[index].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let results = slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("every problem ran"))
        .collect::<Result<Vec<_>, _>>()?;
    BenchReport::from_results(generator.label(), options.n, &options.k_list, results)
}
