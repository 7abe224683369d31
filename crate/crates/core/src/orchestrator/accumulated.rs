/// Start of the comment line that precedes each module in the accumulated code.
pub const MODULE_HEADER_PREFIX: &str = "# === module: ";

/// Finalized code of the modules completed so far, in completion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccumulatedCode {
    sections: Vec<(String, String)>,
}

fn section_text(name: &str, code: &str) -> String {
    format!("{MODULE_HEADER_PREFIX}{name} ===\n{code}\n")
}

impl AccumulatedCode {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, module_name: &str, code: &str) {
        self.sections
            .push((module_name.to_string(), code.to_string()));
    }

    pub fn module_count(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn text(&self) -> String {
        self.text_from(0)
    }

    /// Text with the first `skip` modules replaced by a marker line.
    pub fn text_from(&self, skip: usize) -> String {
        let skip = skip.min(self.sections.len());
        let mut out = String::new();
        if skip > 0 {
            out.push_str(&format!("# ... {skip} earlier module(s) omitted ...\n"));
        }
        for (name, code) in &self.sections[skip..] {
            out.push_str(&section_text(name, code));
        }
        out
    }
}
