//! Domain types shared by every pipeline stage.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Natural-language description of the project to generate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectDescription {
    text: String,
    source: String,
}

impl ProjectDescription {
    pub fn new(text: impl Into<String>, source: impl Into<String>) -> Result<Self, CoreError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CoreError::EmptyProjectDescription);
        }
        Ok(Self {
            text,
            source: source.into(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path).map_err(|source| CoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(text, path.display().to_string())
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// The six agents of the pipeline. Each maps to exactly one prompt template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentRole {
    Manager,
    Dev1,
    Dev2,
    Finalized1,
    Finalized2,
    Verification,
}

impl AgentRole {
    pub const ALL: [AgentRole; 6] = [
        AgentRole::Manager,
        AgentRole::Dev1,
        AgentRole::Dev2,
        AgentRole::Finalized1,
        AgentRole::Finalized2,
        AgentRole::Verification,
    ];

    /// File name of this role's template inside a template directory.
    pub fn template_file_name(self) -> &'static str {
        match self {
            AgentRole::Manager => "manager.txt",
            AgentRole::Dev1 => "dev_1.txt",
            AgentRole::Dev2 => "dev_2.txt",
            AgentRole::Finalized1 => "finalized_1.txt",
            AgentRole::Finalized2 => "finalized_2.txt",
            AgentRole::Verification => "verification.txt",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AgentRole::Manager => "Manager",
            AgentRole::Dev1 => "Dev1",
            AgentRole::Dev2 => "Dev2",
            AgentRole::Finalized1 => "Finalized1",
            AgentRole::Finalized2 => "Finalized2",
            AgentRole::Verification => "Verification",
        };
        f.write_str(name)
    }
}

/// One module description produced by the Manager agent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub ordinal: usize,
    pub name: String,
    pub detailed_description: String,
    pub objective: String,
    pub expected_inputs: String,
    pub expected_outputs: String,
    #[serde(default)]
    pub dependencies: String,
    #[serde(default)]
    pub additional_notes: String,
    #[serde(default)]
    pub good_practices: String,
}

impl ModuleSpec {
    /// Text used for the MODULE_DESCRIPTION binding and the opening pair message.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let fields = [
            ("Module Name", &self.name),
            ("Detailed Description", &self.detailed_description),
            ("Objective", &self.objective),
            ("Expected Inputs", &self.expected_inputs),
            ("Expected Outputs", &self.expected_outputs),
            ("Dependencies", &self.dependencies),
            ("Additional Notes", &self.additional_notes),
            ("Emphasis on Good Practices", &self.good_practices),
        ];
        for (label, value) in fields {
            if value.trim().is_empty() {
                continue;
            }
            out.push_str("- ");
            out.push_str(label);
            out.push_str(": ");
            out.push_str(value.trim());
            out.push('\n');
        }
        out
    }
}

/// A single invariant failure found while validating module specs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Offending field, e.g. `name` or `ordinal`.
    pub field: String,
    pub message: String,
    pub ordinal: Option<usize>,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>, ordinal: Option<usize>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
            ordinal,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ordinal {
            Some(ordinal) => write!(f, "module {ordinal}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Checks the invariants of a single spec. Violations are data, not errors.
pub fn validate_module_spec(spec: &ModuleSpec) -> Vec<Violation> {
    let mut violations = Vec::new();
    if spec.name.trim().is_empty() {
        violations.push(Violation::new("name", "name empty", Some(spec.ordinal)));
    }
    if spec.ordinal == 0 {
        violations.push(Violation::new(
            "ordinal",
            "ordinal must be 1-based",
            Some(spec.ordinal),
        ));
    }
    violations
}

/// Checks every spec plus the run-level ordinal invariants: unique and
/// contiguous from 1.
pub fn validate_module_specs(specs: &[ModuleSpec]) -> Vec<Violation> {
    let mut violations: Vec<Violation> = specs.iter().flat_map(validate_module_spec).collect();

    let mut seen = HashSet::new();
    for spec in specs {
        if !seen.insert(spec.ordinal) {
            violations.push(Violation::new(
                "ordinal",
                "duplicate ordinal",
                Some(spec.ordinal),
            ));
        }
    }
    if specs.is_empty() {
        violations.push(Violation::new("ordinal", "no modules", None));
    }
    for expected in 1..=seen.len() {
        if !seen.contains(&expected) {
            violations.push(Violation::new(
                "ordinal",
                format!("ordinals not contiguous: missing {expected}"),
                None,
            ));
        }
    }
    violations
}

/// Extension of every generated module file.
pub const GENERATED_EXTENSION: &str = "py";

fn sanitize_stem(name: &str) -> String {
    let mut stem = String::with_capacity(name.len());
    for ch in name.trim().chars() {
        let ch = ch.to_ascii_lowercase();
        if ch.is_ascii_lowercase() || ch.is_ascii_digit() {
            stem.push(ch);
        } else if !stem.ends_with('_') {
            stem.push('_');
        }
    }
    let stem = stem.trim_matches('_');
    if stem.is_empty() {
        "module".to_string()
    } else {
        stem.to_string()
    }
}

/// Assigns filesystem-safe file names to module names, one run at a time.
///
/// Names are lowercased, every run of characters outside `[a-z0-9]` becomes a
/// single underscore, and a name that collides with one already handed out
/// gets an ordinal suffix (`util.py`, `util_2.py`, ...). The mapping depends
/// only on the sequence of names, so a replayed run yields the same files.
#[derive(Debug, Default, Clone)]
pub struct FilenameAllocator {
    taken: HashSet<String>,
    seen_stems: HashMap<String, usize>,
}

impl FilenameAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate(&mut self, name: &str) -> Result<String, CoreError> {
        if name.trim().is_empty() {
            return Err(CoreError::EmptyModuleName);
        }
        let stem = sanitize_stem(name);
        let count = self.seen_stems.entry(stem.clone()).or_insert(0);
        *count += 1;
        let mut suffix = *count;
        let mut candidate = if suffix == 1 {
            stem.clone()
        } else {
            format!("{stem}_{suffix}")
        };
        while self.taken.contains(&candidate) {
            suffix += 1;
            candidate = format!("{stem}_{suffix}");
        }
        self.taken.insert(candidate.clone());
        Ok(format!("{candidate}.{GENERATED_EXTENSION}"))
    }
}

/// Sanitizes a single module name with no collision context.
pub fn sanitize_module_filename(name: &str) -> Result<String, CoreError> {
    FilenameAllocator::new().allocate(name)
}

/// Counts newline-separated lines. A single trailing newline does not add a line.
pub fn count_lines(code: &str) -> usize {
    code.lines().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    System,
    User,
    Assistant,
}

impl Speaker {
    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::System => "system",
            Speaker::User => "user",
            Speaker::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub speaker: Speaker,
    pub content: String,
    pub created_at: DateTime<Utc>,
}

impl AgentMessage {
    pub fn new(speaker: Speaker, content: impl Into<String>) -> Self {
        Self {
            speaker,
            content: content.into(),
            created_at: Utc::now(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Speaker::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Speaker::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Speaker::Assistant, content)
    }
}

/// Ordered, append-only transcript of one agent. The first message is always
/// the agent's rendered system prompt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversationHistory {
    owner: AgentRole,
    messages: Vec<AgentMessage>,
}

impl ConversationHistory {
    pub fn new(owner: AgentRole, system_prompt: impl Into<String>) -> Self {
        Self {
            owner,
            messages: vec![AgentMessage::system(system_prompt)],
        }
    }

    pub fn owner(&self) -> AgentRole {
        self.owner
    }

    pub fn messages(&self) -> &[AgentMessage] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn push_user(&mut self, content: impl Into<String>) {
        self.messages.push(AgentMessage::user(content));
    }

    pub fn push_assistant(&mut self, content: impl Into<String>) {
        self.messages.push(AgentMessage::assistant(content));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeStage {
    Pair,
    Finalized,
}

/// Extracted code for one module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleCode {
    module_name: String,
    code: String,
    line_count: usize,
    stage: CodeStage,
}

impl ModuleCode {
    pub fn new(
        module_name: impl Into<String>,
        code: impl Into<String>,
        stage: CodeStage,
    ) -> Result<Self, CoreError> {
        let module_name = module_name.into();
        let code = code.into();
        if stage == CodeStage::Finalized && code.is_empty() {
            return Err(CoreError::EmptyFinalizedCode(module_name));
        }
        Ok(Self {
            line_count: count_lines(&code),
            module_name,
            code,
            stage,
        })
    }

    pub fn module_name(&self) -> &str {
        &self.module_name
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn line_count(&self) -> usize {
        self.line_count
    }

    pub fn stage(&self) -> CodeStage {
        self.stage
    }

    /// Re-labels pair-stage code as the module's final code.
    pub fn into_finalized(self) -> Result<Self, CoreError> {
        Self::new(self.module_name, self.code, CodeStage::Finalized)
    }
}

/// Improvement instructions produced by the Verification agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Review {
    module_name: String,
    body: String,
}

impl Review {
    pub fn new(module_name: impl Into<String>, body: impl Into<String>) -> Result<Self, CoreError> {
        let module_name = module_name.into();
        let body = body.into();
        if body.trim().is_empty() {
            return Err(CoreError::EmptyReview(module_name));
        }
        Ok(Self { module_name, body })
    }

    pub fn module_name(&self) -> &str {
        &self.module_name
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

/// Token counts of one completion call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::Add for Usage {
    type Output = Usage;

    fn add(self, rhs: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub module_name: String,
    pub line_count: usize,
    pub duration_minutes: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportTotals {
    pub total_lines: usize,
    pub total_minutes: f64,
    pub module_count: usize,
    pub total_cost: f64,
}

/// Time and cost of the Manager decomposition call, kept apart from the
/// per-module rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCost {
    pub duration_minutes: f64,
    pub cost: f64,
}

/// Per-module LOC, wall-clock minutes and cost, with totals derived from rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    rows: Vec<ReportRow>,
    #[serde(default)]
    decomposition: DecompositionCost,
}

#[derive(Serialize)]
struct RunReportDocument<'a> {
    rows: &'a [ReportRow],
    totals: ReportTotals,
    decomposition: DecompositionCost,
}

impl RunReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_row(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn set_decomposition(&mut self, decomposition: DecompositionCost) {
        self.decomposition = decomposition;
    }

    pub fn decomposition(&self) -> DecompositionCost {
        self.decomposition
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    /// Column sums of the rows; never stored.
    pub fn totals(&self) -> ReportTotals {
        ReportTotals {
            total_lines: self.rows.iter().map(|r| r.line_count).sum(),
            total_minutes: self.rows.iter().map(|r| r.duration_minutes).sum(),
            module_count: self.rows.len(),
            total_cost: self.rows.iter().map(|r| r.cost).sum(),
        }
    }

    /// JSON document with `rows`, `totals` and `decomposition`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(RunReportDocument {
            rows: &self.rows,
            totals: self.totals(),
            decomposition: self.decomposition,
        })
        .expect("report serializes")
    }

    /// Plain-text table in the shape of lines / minutes / modules / bill.
    pub fn render_table(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.module_name.chars().count())
            .chain(std::iter::once("Module".len()))
            .max()
            .unwrap_or(6);
        let mut out = format!(
            "{:<name_width$}  {:>8}  {:>8}  {:>8}\n",
            "Module", "Lines", "Mins", "Cost"
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{:<name_width$}  {:>8}  {:>8.2}  {:>8.2}\n",
                row.module_name, row.line_count, row.duration_minutes, row.cost
            ));
        }
        let totals = self.totals();
        out.push_str(&format!(
            "{:<name_width$}  {:>8}  {:>8.2}  {:>8.2}\n",
            format!("total ({} modules)", totals.module_count),
            totals.total_lines,
            totals.total_minutes,
            totals.total_cost
        ));
        out
    }
}
