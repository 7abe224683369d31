//! Fenced code blocks in model output.
//!
//! A fence is a line whose first non-blank characters are three backticks.
//! The opening fence may carry a language tag; the closing fence is bare.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencedBlock {
    /// Interior text, newlines preserved, without the final newline before
    /// the closing fence.
    pub content: String,
    /// Byte offset of the opening fence line.
    pub start: usize,
    /// Byte offset just past the closing fence line (or end of text).
    pub end: usize,
    pub terminated: bool,
}

const FENCE: &str = "```";

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with(FENCE)
}

fn is_closing_fence(line: &str) -> bool {
    let trimmed = line.trim();
    trimmed.starts_with(FENCE) && trimmed[FENCE.len()..].trim_start_matches('`').is_empty()
}

fn strip_line_break(interior: &str) -> &str {
    interior
        .strip_suffix("\r\n")
        .or_else(|| interior.strip_suffix('\n'))
        .unwrap_or(interior)
}

/// All fenced blocks, in order of appearance.
pub fn find_fenced_blocks(text: &str) -> Vec<FencedBlock> {
    let mut blocks = Vec::new();
    let mut offset = 0;
    let mut open: Option<(usize, usize)> = None;
    for line in text.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        match open {
            None if is_fence(line) => open = Some((line_start, offset)),
            Some((start, interior_start)) if is_closing_fence(line) => {
                blocks.push(FencedBlock {
                    content: strip_line_break(&text[interior_start..line_start]).to_string(),
                    start,
                    end: offset,
                    terminated: true,
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some((start, interior_start)) = open {
        tracing::warn!("unterminated code fence; taking text to end of response");
        blocks.push(FencedBlock {
            content: text[interior_start.min(text.len())..].to_string(),
            start,
            end: text.len(),
            terminated: false,
        });
    }
    blocks
}

/// Interior of the last fenced block, or `None` when the text has no fence.
pub fn extract_code(response: &str) -> Option<String> {
    find_fenced_blocks(response).pop().map(|b| b.content)
}

/// The text with every fenced block removed.
pub fn strip_fenced_blocks(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for block in find_fenced_blocks(text) {
        out.push_str(&text[cursor..block.start]);
        cursor = block.end;
    }
    out.push_str(&text[cursor..]);
    out
}
