//! Agent prompt templates and placeholder substitution.
//!
//! Templates are plain text with bare uppercase placeholder tokens. Rendering
//! is a single left-to-right pass: text inserted for a token is never scanned
//! again, so model output that happens to contain `MODULE_CODE` survives
//! verbatim.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::types::AgentRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placeholder {
    ProjectDescription,
    ProjectDescriptions,
    AccumulatedCode,
    ModuleDescription,
    ModuleCode,
    ModuleName,
    Review,
}

impl Placeholder {
    pub const ALL: [Placeholder; 7] = [
        Placeholder::ProjectDescription,
        Placeholder::ProjectDescriptions,
        Placeholder::AccumulatedCode,
        Placeholder::ModuleDescription,
        Placeholder::ModuleCode,
        Placeholder::ModuleName,
        Placeholder::Review,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Placeholder::ProjectDescription => "PROJECT_DESCRIPTION",
            Placeholder::ProjectDescriptions => "PROJECT_DESCRIPTIONS",
            Placeholder::AccumulatedCode => "ACCUMULATED_CODE",
            Placeholder::ModuleDescription => "MODULE_DESCRIPTION",
            Placeholder::ModuleCode => "MODULE_CODE",
            Placeholder::ModuleName => "MODULE_NAME",
            Placeholder::Review => "REVIEW",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.token() == token)
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

// Longest token first so PROJECT_DESCRIPTIONS is never read as
// PROJECT_DESCRIPTION followed by a stray "S".
const MATCH_ORDER: [Placeholder; 7] = [
    Placeholder::ProjectDescriptions,
    Placeholder::ProjectDescription,
    Placeholder::ModuleDescription,
    Placeholder::AccumulatedCode,
    Placeholder::ModuleCode,
    Placeholder::ModuleName,
    Placeholder::Review,
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template missing: {role} ({path})")]
    Missing { role: AgentRole, path: PathBuf },

    #[error("template empty: {role}")]
    Empty { role: AgentRole },

    #[error("failed to read template for {role}: {source}")]
    Io {
        role: AgentRole,
        #[source]
        source: std::io::Error,
    },

    #[error("unbound: {}", join_tokens(.0))]
    Unbound(Vec<Placeholder>),
}

fn join_tokens(tokens: &[Placeholder]) -> String {
    tokens
        .iter()
        .map(|p| p.token())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    role: AgentRole,
    body: String,
}

impl PromptTemplate {
    pub fn new(role: AgentRole, body: impl Into<String>) -> Result<Self, PromptError> {
        let body = body.into();
        if body.trim().is_empty() {
            return Err(PromptError::Empty { role });
        }
        Ok(Self { role, body })
    }

    pub fn role(&self) -> AgentRole {
        self.role
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

/// Replacement text per placeholder token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bindings(BTreeMap<Placeholder, String>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, placeholder: Placeholder, value: impl Into<String>) -> Self {
        self.insert(placeholder, value);
        self
    }

    pub fn insert(&mut self, placeholder: Placeholder, value: impl Into<String>) {
        self.0.insert(placeholder, value.into());
    }

    pub fn remove(&mut self, placeholder: Placeholder) -> Option<String> {
        self.0.remove(&placeholder)
    }

    pub fn get(&self, placeholder: Placeholder) -> Option<&str> {
        self.0.get(&placeholder).map(String::as_str)
    }
}

enum Segment<'a> {
    Text(&'a str),
    Token(Placeholder),
}

fn segments(body: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut literal_start = 0;
    let mut i = 0;
    let bytes = body.as_bytes();
    while i < bytes.len() {
        let rest = &body[i..];
        if let Some(p) = MATCH_ORDER.iter().find(|p| rest.starts_with(p.token())) {
            if literal_start < i {
                out.push(Segment::Text(&body[literal_start..i]));
            }
            out.push(Segment::Token(*p));
            i += p.token().len();
            literal_start = i;
        } else {
            // advance one whole char to stay on a UTF-8 boundary
            i += rest.chars().next().map_or(1, char::len_utf8);
        }
    }
    if literal_start < body.len() {
        out.push(Segment::Text(&body[literal_start..]));
    }
    out
}

/// Exact set of placeholder tokens occurring in the template body.
pub fn list_placeholders(template: &PromptTemplate) -> BTreeSet<Placeholder> {
    segments(&template.body)
        .into_iter()
        .filter_map(|s| match s {
            Segment::Token(p) => Some(p),
            Segment::Text(_) => None,
        })
        .collect()
}

/// Substitutes every placeholder occurrence in one pass.
///
/// Fails with every unbound token listed when a placeholder present in the
/// body has no binding.
pub fn render(template: &PromptTemplate, bindings: &Bindings) -> Result<String, PromptError> {
    let segments = segments(&template.body);
    let unbound: BTreeSet<Placeholder> = segments
        .iter()
        .filter_map(|s| match s {
            Segment::Token(p) if bindings.get(*p).is_none() => Some(*p),
            _ => None,
        })
        .collect();
    if !unbound.is_empty() {
        return Err(PromptError::Unbound(unbound.into_iter().collect()));
    }
    let mut out = String::with_capacity(template.body.len());
    for segment in segments {
        match segment {
            Segment::Text(text) => out.push_str(text),
            Segment::Token(p) => out.push_str(bindings.get(p).unwrap_or_default()),
        }
    }
    Ok(out)
}

pub fn load_template(role: AgentRole, template_dir: &Path) -> Result<PromptTemplate, PromptError> {
    let path = template_dir.join(role.template_file_name());
    let body = match std::fs::read_to_string(&path) {
        Ok(body) => body,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(PromptError::Missing { role, path })
        }
        Err(source) => return Err(PromptError::Io { role, source }),
    };
    PromptTemplate::new(role, body)
}

fn builtin_body(role: AgentRole) -> &'static str {
    match role {
        AgentRole::Manager => include_str!("../templates/manager.txt"),
        AgentRole::Dev1 => include_str!("../templates/dev_1.txt"),
        AgentRole::Dev2 => include_str!("../templates/dev_2.txt"),
        AgentRole::Finalized1 => include_str!("../templates/finalized_1.txt"),
        AgentRole::Finalized2 => include_str!("../templates/finalized_2.txt"),
        AgentRole::Verification => include_str!("../templates/verification.txt"),
    }
}

/// All six role templates.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<AgentRole, PromptTemplate>,
}

impl TemplateSet {
    /// Templates compiled into the crate.
    pub fn builtin() -> Self {
        let templates = AgentRole::ALL
            .into_iter()
            .map(|role| {
                let template =
                    PromptTemplate::new(role, builtin_body(role)).expect("built-in template");
                (role, template)
            })
            .collect();
        Self { templates }
    }

    pub fn load(template_dir: &Path) -> Result<Self, PromptError> {
        let templates = AgentRole::ALL
            .into_iter()
            .map(|role| Ok((role, load_template(role, template_dir)?)))
            .collect::<Result<_, PromptError>>()?;
        Ok(Self { templates })
    }

    /// Directory templates when configured, otherwise the built-in set.
    pub fn from_optional_dir(template_dir: Option<&Path>) -> Result<Self, PromptError> {
        match template_dir {
            Some(dir) => Self::load(dir),
            None => Ok(Self::builtin()),
        }
    }

    pub fn get(&self, role: AgentRole) -> &PromptTemplate {
        &self.templates[&role]
    }
}
