//! Functional-correctness evaluation: pass@k, benchmark runs, and manual
//! accuracy reports.

mod bench;
mod manual;
mod passk;
mod problems;
mod report;
mod sandbox;

use std::path::PathBuf;

use thiserror::Error;

pub use bench::{
    aggregate_results, run_benchmark, BackendGenerator, BenchOptions, BenchReport,
    CanonicalGenerator, EmptyGenerator, Generator, PipelineGenerator, ProblemResult, ResultRecord,
    ResultSink,
};
pub use manual::{load_manual_records, manual_accuracy, parse_manual_records, ManualEvalRecord};
pub use passk::{aggregate_pass_at_k, pass_at_k};
pub use problems::{load_problems, parse_problems, BenchmarkProblem};
pub use report::{percent, render_bench_report, render_manual_report, RenderedReport};
pub use sandbox::{
    evaluate_candidate, EchoOracleSandbox, ExecPayload, ExecVerdict, Sandbox, SubprocessSandbox,
    Verdict, VerdictStatus, DRIVER_GRACE, SANDBOX_UNAVAILABLE,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must satisfy 1 <= k <= n (n = {n}, k = {k})")]
    KOutOfRange { n: usize, k: usize },

    #[error("c must satisfy c <= n (n = {n}, c = {c})")]
    COutOfRange { n: usize, c: usize },

    #[error("no results to aggregate")]
    EmptyResults,

    #[error("task {task_id}: {n} sample(s) is fewer than k = {k}")]
    TooFewSamples { task_id: String, n: usize, k: usize },

    #[error("k list is empty")]
    EmptyKList,

    #[error("k = {k} exceeds samples per problem n = {n}")]
    KExceedsSamples { k: usize, n: usize },

    #[error("line {line}: {message}")]
    ProblemLine { line: usize, message: String },

    #[error("line {line}: duplicate id `{task_id}`")]
    DuplicateTask { task_id: String, line: usize },

    #[error("total must be greater than zero")]
    ZeroTotal,

    #[error("passes ({passes}) exceed total ({total})")]
    PassesExceedTotal { passes: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
