//! Multi-agent code generation pipeline and functional-correctness evaluation.
//!
//! A Manager agent splits a project description into modules; each module is
//! written by a Dev_1/Dev_2 pair, optionally reviewed by a Verification agent,
//! polished by a Finalized_1/Finalized_2 pair and saved to its own file. The
//! [`eval`] module scores generators with the unbiased pass@k estimator.

pub mod backend;
pub mod config;
pub mod error;
pub mod eval;
pub mod orchestrator;
pub mod prompt;
pub mod types;

pub use config::RunConfig;
pub use error::CoreError;
pub use types::{AgentRole, ModuleCode, ModuleSpec, ProjectDescription, RunReport};
