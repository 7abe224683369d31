use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::accumulated::AccumulatedCode;
use super::stages::{CallRecord, DEFAULT_REVIEW};
use super::{OrchestratorError, PipelineError, Stage};
use crate::backend::ChatBackend;
use crate::config::RunConfig;
use crate::prompt::TemplateSet;
use crate::types::{
    AgentRole, ConversationHistory, DecompositionCost, FilenameAllocator, ModuleCode, ModuleSpec,
    ProjectDescription, ReportRow, Review, RunReport,
};

pub const RUN_REPORT_FILE: &str = "run_report.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

/// Everything a run has produced so far.
#[derive(Debug, Clone)]
pub struct PipelineState {
    project: ProjectDescription,
    specs: Vec<ModuleSpec>,
    accumulated: AccumulatedCode,
    completed: Vec<ModuleCode>,
    histories: BTreeMap<AgentRole, ConversationHistory>,
    report: RunReport,
}

impl PipelineState {
    pub fn new(project: ProjectDescription, specs: Vec<ModuleSpec>) -> Self {
        Self {
            project,
            specs,
            accumulated: AccumulatedCode::new(),
            completed: Vec::new(),
            histories: BTreeMap::new(),
            report: RunReport::new(),
        }
    }

    pub fn project(&self) -> &ProjectDescription {
        &self.project
    }

    pub fn specs(&self) -> &[ModuleSpec] {
        &self.specs
    }

    pub fn accumulated(&self) -> &AccumulatedCode {
        &self.accumulated
    }

    pub fn accumulated_code(&self) -> String {
        self.accumulated.text()
    }

    pub fn completed(&self) -> &[ModuleCode] {
        &self.completed
    }

    /// Latest history of each agent; two-agent stages replace theirs per module.
    pub fn history(&self, role: AgentRole) -> Option<&ConversationHistory> {
        self.histories.get(&role)
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub(super) fn set_history(&mut self, history: ConversationHistory) {
        self.histories.insert(history.owner(), history);
    }

    /// Appends finalized code to the accumulated context.
    pub fn complete_module(&mut self, code: ModuleCode) {
        self.accumulated.push(code.module_name(), code.code());
        self.completed.push(code);
    }
}

/// Result of a successful run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub files: Vec<PathBuf>,
    pub state: PipelineState,
    pub warnings: Vec<String>,
}

type ProgressSink<'a> = Box<dyn FnMut(&str) + 'a>;

/// Drives the agents for one run. Runs are sequential; build one
/// orchestrator per concurrent run.
pub struct Orchestrator<'a> {
    config: &'a RunConfig,
    templates: TemplateSet,
    backend: &'a dyn ChatBackend,
    calls: RefCell<Vec<CallRecord>>,
    transcript: RefCell<Option<(PathBuf, File)>>,
    progress: RefCell<Option<ProgressSink<'a>>>,
}

impl<'a> Orchestrator<'a> {
    pub fn new(config: &'a RunConfig, templates: TemplateSet, backend: &'a dyn ChatBackend) -> Self {
        Self {
            config,
            templates,
            backend,
            calls: RefCell::new(Vec::new()),
            transcript: RefCell::new(None),
            progress: RefCell::new(None),
        }
    }

    /// Receives one human-readable line per finished stage.
    pub fn with_progress(self, progress: impl FnMut(&str) + 'a) -> Self {
        *self.progress.borrow_mut() = Some(Box::new(progress));
        self
    }

    pub fn config(&self) -> &RunConfig {
        self.config
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub(super) fn backend(&self) -> &dyn ChatBackend {
        self.backend
    }

    /// Every completion call made so far, in order.
    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.borrow().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.borrow().len()
    }

    fn progress(&self, line: &str) {
        if let Some(progress) = self.progress.borrow_mut().as_mut() {
            progress(line);
        }
    }

    pub(super) fn record_call(&self, record: CallRecord) -> Result<(), OrchestratorError> {
        if let Some((path, file)) = self.transcript.borrow_mut().as_mut() {
            let line = serde_json::to_string(&record).expect("call record serializes");
            writeln!(file, "{line}").map_err(|source| OrchestratorError::Io {
                path: path.clone(),
                source,
            })?;
        }
        self.calls.borrow_mut().push(record);
        Ok(())
    }

    fn cost_since(&self, start: usize) -> f64 {
        self.calls.borrow()[start..].iter().map(|c| c.cost).sum()
    }

    /// Runs the whole pipeline, writing module files, `run_report.json` and
    /// `transcript.jsonl` into the configured output directory.
    ///
    /// Any stage error aborts the run; files already saved and the report so
    /// far stay on disk.
    pub fn run(&self, project: &ProjectDescription) -> Result<RunOutcome, PipelineError> {
        let output_dir = self.config.output_dir.clone();
        let setup = |source| PipelineError {
            stage: Stage::Setup,
            module: None,
            source,
        };
        std::fs::create_dir_all(&output_dir).map_err(|source| {
            setup(OrchestratorError::Io {
                path: output_dir.clone(),
                source,
            })
        })?;
        let transcript_path = output_dir.join(TRANSCRIPT_FILE);
        let file = File::create(&transcript_path).map_err(|source| {
            setup(OrchestratorError::Io {
                path: transcript_path.clone(),
                source,
            })
        })?;
        *self.transcript.borrow_mut() = Some((transcript_path, file));
        let result = self.run_inner(project, &output_dir);
        *self.transcript.borrow_mut() = None;
        result
    }

    fn run_inner(&self, project: &ProjectDescription, output_dir: &Path) -> Result<RunOutcome, PipelineError> {
        let report_path = output_dir.join(RUN_REPORT_FILE);
        let mut state = PipelineState::new(project.clone(), Vec::new());

        let started = Instant::now();
        let (manager, history) = self.decompose(project).map_err(|source| PipelineError {
            stage: Stage::Decomposition,
            module: None,
            source,
        })?;
        state.specs = manager.specs;
        state.set_history(history);
        state.report.set_decomposition(DecompositionCost {
            duration_minutes: started.elapsed().as_secs_f64() / 60.0,
            cost: self.cost_since(0),
        });
        let warnings = manager.warnings;
        self.progress(&format!(
            "decomposed project into {} module(s)",
            state.specs.len()
        ));
        write_report(&state.report, &report_path).map_err(|source| PipelineError {
            stage: Stage::Save,
            module: None,
            source,
        })?;

        let mut names = FilenameAllocator::new();
        let mut files = Vec::with_capacity(state.specs.len());
        for spec in state.specs.clone() {
            let fail = |stage: Stage| {
                let module = spec.name.clone();
                move |source| PipelineError {
                    stage,
                    module: Some(module),
                    source,
                }
            };
            let module_started = Instant::now();
            let calls_before = self.call_count();

            let pair = self
                .run_pair_rounds(&spec, &mut state)
                .map_err(fail(Stage::PairProgramming))?;
            self.progress(&format!(
                "[{}/{}] {}: pair programming done ({} lines)",
                spec.ordinal,
                state.specs.len(),
                spec.name,
                pair.code.line_count()
            ));

            let review = if self.config.verification_enabled {
                self.get_verification_review(&spec, &pair.code, &mut state)
                    .map_err(fail(Stage::Verification))?
            } else {
                Review::new(&spec.name, DEFAULT_REVIEW)
                    .map_err(|e| fail(Stage::Verification)(e.into()))?
            };

            let finalized = self
                .finalize_code(&spec, &pair.code, &review, &mut state)
                .map_err(fail(Stage::Finalization))?;
            let code = finalized.code;
            state.complete_module(code.clone());

            let path = save_module(&code, output_dir, &mut names).map_err(fail(Stage::Save))?;
            state.report.push_row(ReportRow {
                module_name: spec.name.clone(),
                line_count: code.line_count(),
                duration_minutes: module_started.elapsed().as_secs_f64() / 60.0,
                cost: self.cost_since(calls_before),
            });
            write_report(&state.report, &report_path).map_err(fail(Stage::Save))?;
            self.progress(&format!(
                "[{}/{}] {}: saved {} ({} lines{})",
                spec.ordinal,
                state.specs.len(),
                spec.name,
                path.display(),
                code.line_count(),
                if finalized.fell_back {
                    ", finalization fell back to pair code"
                } else {
                    ""
                }
            ));
            files.push(path);
        }

        Ok(RunOutcome {
            report: state.report.clone(),
            files,
            state,
            warnings,
        })
    }
}

fn write_atomic(dir: &Path, path: &Path, contents: &[u8]) -> Result<(), OrchestratorError> {
    let io_err = |source| OrchestratorError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn write_report(report: &RunReport, path: &Path) -> Result<(), OrchestratorError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let text = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
    write_atomic(dir, path, text.as_bytes())
}

/// Writes module code plus one trailing newline to a file named after the
/// module, via a temp file and rename.
pub fn save_module(
    module_code: &ModuleCode,
    output_dir: &Path,
    names: &mut FilenameAllocator,
) -> Result<PathBuf, OrchestratorError> {
    let file_name = names.allocate(module_code.module_name())?;
    let path = output_dir.join(file_name);
    let mut contents = String::with_capacity(module_code.code().len() + 1);
    contents.push_str(module_code.code());
    contents.push('\n');
    write_atomic(output_dir, &path, contents.as_bytes())?;
    Ok(path)
}

/// Loads templates per `config.template_dir` and runs the pipeline.
pub fn run_pipeline(
    project: &ProjectDescription,
    config: &RunConfig,
    backend: &dyn ChatBackend,
) -> Result<RunOutcome, PipelineError> {
    let templates =
        TemplateSet::from_optional_dir(config.template_dir.as_deref()).map_err(|e| PipelineError {
            stage: Stage::Setup,
            module: None,
            source: e.into(),
        })?;
    Orchestrator::new(config, templates, backend).run(project)
}
