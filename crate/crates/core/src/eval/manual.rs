use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Human verdict on the code generated for one project description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualEvalRecord {
    pub description_id: String,
    pub passed: bool,
    #[serde(default)]
    pub adjustments: String,
}

/// `passes / total × 100`.
pub fn manual_accuracy(passes: usize, total: usize) -> Result<f64, EvalError> {
    if total == 0 {
        return Err(EvalError::ZeroTotal);
    }
    if passes > total {
        return Err(EvalError::PassesExceedTotal { passes, total });
    }
    Ok(passes as f64 * 100.0 / total as f64)
}

pub fn parse_manual_records(text: &str) -> Result<Vec<ManualEvalRecord>, EvalError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ManualEvalRecord =
            serde_json::from_str(line).map_err(|e| EvalError::ProblemLine {
                line: index + 1,
                message: e.to_string(),
            })?;
        if !seen.insert(record.description_id.clone()) {
            return Err(EvalError::DuplicateTask {
                task_id: record.description_id,
                line: index + 1,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_manual_records(path: &Path) -> Result<Vec<ManualEvalRecord>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manual_records(&text)
}
