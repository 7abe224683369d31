use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;

/// One HumanEval-format task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkProblem {
    pub task_id: String,
    pub prompt: String,
    pub canonical_solution: String,
    pub test: String,
    pub entry_point: String,
}

const FIELDS: [&str; 5] = ["task_id", "prompt", "canonical_solution", "test", "entry_point"];

fn parse_line(line_no: usize, line: &str) -> Result<BenchmarkProblem, EvalError> {
    let bad = |message: String| EvalError::ProblemLine {
        line: line_no,
        message,
    };
    let value: Value = serde_json::from_str(line).map_err(|e| bad(format!("invalid JSON: {e}")))?;
    let Value::Object(object) = value else {
        return Err(bad("expected a JSON object".into()));
    };
    let mut fields = Vec::with_capacity(FIELDS.len());
    for name in FIELDS {
        match object.get(name) {
            None | Some(Value::Null) => return Err(bad(format!("missing {name}"))),
            Some(Value::String(s)) => fields.push(s.clone()),
            Some(_) => return Err(bad(format!("{name} is not a string"))),
        }
    }
    let [task_id, prompt, canonical_solution, test, entry_point]: [String; 5] =
        fields.try_into().expect("five fields");
    if entry_point.trim().is_empty() {
        return Err(bad("missing entry_point".into()));
    }
    Ok(BenchmarkProblem {
        task_id,
        prompt,
        canonical_solution,
        test,
        entry_point,
    })
}

/// Parses a JSONL problem suite, one problem per non-blank line, in file order.
pub fn parse_problems(text: &str) -> Result<Vec<BenchmarkProblem>, EvalError> {
    let mut problems = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let problem = parse_line(index + 1, line)?;
        if !seen.insert(problem.task_id.clone()) {
            return Err(EvalError::DuplicateTask {
                task_id: problem.task_id,
                line: index + 1,
            });
        }
        problems.push(problem);
    }
    Ok(problems)
}

pub fn load_problems(path: &Path) -> Result<Vec<BenchmarkProblem>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problems(&text)
}
