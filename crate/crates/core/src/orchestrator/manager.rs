//! Parsing of the Manager agent's module breakdown.

use serde_json::{Map, Value};

use super::extract::find_fenced_blocks;
use super::OrchestratorError;
use crate::types::ModuleSpec;

/// Parsed module list plus notes about keys that were skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManagerOutput {
    pub specs: Vec<ModuleSpec>,
    pub warnings: Vec<String>,
}

fn normalize_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for ch in key.trim().chars() {
        let ch = ch.to_ascii_lowercase();
        if ch.is_ascii_alphanumeric() {
            out.push(ch);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

fn module_ordinal(key: &str) -> Option<usize> {
    let rest = normalize_key(key).strip_prefix("module")?.to_string();
    let digits = rest.trim_start_matches('_');
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|n| *n >= 1)
}

fn value_text(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(value_text).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

fn spec_from_object(ordinal: usize, fields: &Map<String, Value>, warnings: &mut Vec<String>) -> ModuleSpec {
    let mut spec = ModuleSpec {
        ordinal,
        ..Default::default()
    };
    for (key, value) in fields {
        let text = value_text(value);
        let slot = match normalize_key(key).as_str() {
            "name" | "module_name" => &mut spec.name,
            "detailed_description" | "description" => &mut spec.detailed_description,
            "objective" => &mut spec.objective,
            "expected_inputs" => &mut spec.expected_inputs,
            "expected_outputs" => &mut spec.expected_outputs,
            "dependencies" | "dependencies_if_any" => &mut spec.dependencies,
            "additional_notes" => &mut spec.additional_notes,
            "emphasis_on_good_practices" | "good_practices" => &mut spec.good_practices,
            _ => {
                warnings.push(format!("module_{ordinal}: ignored field `{key}`"));
                continue;
            }
        };
        *slot = text;
    }
    spec
}

fn strip_surrounding_fence(raw: &str) -> &str {
    let trimmed = raw.trim();
    if !trimmed.starts_with("```") {
        return trimmed;
    }
    match find_fenced_blocks(trimmed).first() {
        Some(block) if block.start == 0 && block.end == trimmed.len() => {
            let interior_start = trimmed.find('\n').map_or(trimmed.len(), |i| i + 1);
            let interior_end = (interior_start + block.content.len()).min(trimmed.len());
            &trimmed[interior_start..interior_end]
        }
        _ => trimmed,
    }
}

/// Parses the Manager's JSON object of `module_N` entries.
///
/// One surrounding fenced block is stripped. Field keys are matched
/// case-insensitively with spaces and underscores treated alike, so both
/// `"Additional Notes"` and `"additional_notes"` land in the same field.
/// Top-level keys that are not `module_N` are skipped with a warning.
/// Modules come back ordered by `N`.
pub fn parse_manager_json(raw: &str) -> Result<ManagerOutput, OrchestratorError> {
    let candidate = strip_surrounding_fence(raw);
    let value: Value = match serde_json::from_str(candidate) {
        Ok(value) => value,
        Err(first_err) => {
            // prose around a fenced JSON block
            let fallback = find_fenced_blocks(raw)
                .into_iter()
                .rev()
                .find_map(|b| serde_json::from_str::<Value>(&b.content).ok());
            match fallback {
                Some(value) => value,
                None => {
                    return Err(OrchestratorError::ManagerParse {
                        message: first_err.to_string(),
                        raw: raw.to_string(),
                    })
                }
            }
        }
    };
    let Value::Object(object) = value else {
        return Err(OrchestratorError::ManagerParse {
            message: "expected a JSON object of module_N entries".into(),
            raw: raw.to_string(),
        });
    };

    let mut warnings = Vec::new();
    let mut specs = Vec::new();
    for (key, value) in &object {
        let Some(ordinal) = module_ordinal(key) else {
            warnings.push(format!("ignored top-level key `{key}`"));
            continue;
        };
        let Value::Object(fields) = value else {
            warnings.push(format!("ignored `{key}`: not an object"));
            continue;
        };
        specs.push(spec_from_object(ordinal, fields, &mut warnings));
    }
    specs.sort_by_key(|s| s.ordinal);
    for warning in &warnings {
        tracing::warn!("{warning}");
    }
    Ok(ManagerOutput { specs, warnings })
}
