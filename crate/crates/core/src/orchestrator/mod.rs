//! The generation pipeline: Manager decomposition, Dev pair programming,
//! optional verification, Finalized pair clean-up, and file emission.

mod accumulated;
mod extract;
mod manager;
mod pipeline;
mod stages;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;
use crate::error::CoreError;
use crate::prompt::PromptError;
use crate::types::{AgentRole, Violation};

pub use accumulated::{AccumulatedCode, MODULE_HEADER_PREFIX};
pub use extract::{extract_code, find_fenced_blocks, strip_fenced_blocks, FencedBlock};
pub use manager::{parse_manager_json, ManagerOutput};
pub use pipeline::{
    run_pipeline, save_module, Orchestrator, PipelineState, RunOutcome, RUN_REPORT_FILE,
    TRANSCRIPT_FILE,
};
pub use stages::{CallRecord, FinalizeOutcome, PairOutcome, RoundOutcome, DEFAULT_REVIEW};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("{role} call failed: {source}")]
    Backend {
        role: AgentRole,
        #[source]
        source: BackendError,
    },

    #[error(transparent)]
    Prompt(#[from] PromptError),

    #[error("could not parse Manager output: {message}")]
    ManagerParse { message: String, raw: String },

    #[error("invalid module descriptions: {}", join(.0))]
    InvalidModules(Vec<Violation>),

    #[error("no code produced for module `{module}` ({} responses)", .transcript.len())]
    NoCode {
        module: String,
        transcript: Vec<String>,
    },

    #[error("verification review for module `{module}` is empty")]
    EmptyReview { module: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Setup,
    Decomposition,
    PairProgramming,
    Verification,
    Finalization,
    Save,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Setup => "setup",
            Stage::Decomposition => "decomposition",
            Stage::PairProgramming => "pair programming",
            Stage::Verification => "verification",
            Stage::Finalization => "finalization",
            Stage::Save => "save",
        })
    }
}

/// A run-aborting failure, tagged with the stage and module it happened in.
#[derive(Debug, Error)]
#[error("{stage} failed{}: {source}", .module.as_ref().map(|m| format!(" for module `{m}`")).unwrap_or_default())]
pub struct PipelineError {
    pub stage: Stage,
    pub module: Option<String>,
    #[source]
    pub source: OrchestratorError,
}
