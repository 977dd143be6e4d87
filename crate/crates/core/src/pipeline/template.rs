use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::devicespec::{to_document, DeviceSpec, Provenance};
use crate::erc::{explain, ErcReport};

pub const POSITIVE_MARKER: &str = "[POSITIVE EXAMPLE]";
pub const NEGATIVE_MARKER: &str = "[NEGATIVE EXAMPLE]";
pub const DEFAULT_STOP_TOKEN: &str = "ALL-CHECKS-PASSED";

static BUNDLED: &str = include_str!("../../data/template.prompt.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnippetKind {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub kind: SnippetKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub description: String,
    pub response: String,
}

fn default_stop_token() -> String {
    DEFAULT_STOP_TOKEN.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub preamble: String,
    pub format_instructions: String,
    pub one_shot_example: WorkedExample,
    pub snippets: Vec<Snippet>,
    pub reflection_checklist: Vec<String>,
    #[serde(default = "default_stop_token")]
    pub stop_token: String,
}

impl PromptTemplate {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled template is valid")
    }

    pub fn bundled_json() -> &'static str {
        BUNDLED
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let t: PromptTemplate = serde_json::from_str(text).map_err(|e| PipelineError::Template(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Template(m.to_string()));
        let count = |k| self.snippets.iter().filter(|s| s.kind == k).count();
        if count(SnippetKind::Positive) < 2 || count(SnippetKind::Negative) < 1 {
            return bad("need at least two positive and one negative snippet");
        }
        if self.stop_token.trim().is_empty() {
            return bad("stop token is empty");
        }
        if self.one_shot_example.response.trim().is_empty() {
            return bad("worked example has no response");
        }
        let texts = [&self.preamble, &self.format_instructions, &self.one_shot_example.response]
            .into_iter()
            .chain(self.snippets.iter().map(|s| &s.text))
            .chain(&self.reflection_checklist);
        for t in texts {
            if t.contains(&self.stop_token) {
                return bad("stop token appears inside the template text");
            }
        }
        Ok(())
    }

    pub fn with_stop_token(mut self, token: impl Into<String>) -> Self {
        self.stop_token = token.into();
        self
    }
}

/// The document shown to the model. Provenance is left out so prompts do not
/// depend on which provider or clock produced the previous turn.
fn prompt_document(spec: &DeviceSpec) -> String {
    let mut s = spec.clone();
    s.provenance = Provenance::default();
    to_document(&s)
}

fn header(out: &mut String, t: &PromptTemplate) {
    let _ = write!(out, "{}\n\n## Output format\n{}\n\n", t.preamble.trim_end(), t.format_instructions.trim_end());
}

/// Preamble, format, worked example, snippets, then the task description.
pub fn assemble_generation_prompt(t: &PromptTemplate, description: &str) -> String {
    let mut out = String::new();
    header(&mut out, t);
    let ex = &t.one_shot_example;
    let _ = write!(
        out,
        "## Worked example\nDescription: {}\n\n{}\n\n## Snippets\n",
        ex.description.trim(),
        ex.response.trim_end()
    );
    for s in &t.snippets {
        let marker = match s.kind {
            SnippetKind::Positive => POSITIVE_MARKER,
            SnippetKind::Negative => NEGATIVE_MARKER,
        };
        let _ = write!(out, "{marker}\n{}\n\n", s.text.trim_end());
    }
    let _ = write!(out, "## Task\nDescription: {}\n", description.trim());
    out
}

fn checklist(out: &mut String, t: &PromptTemplate) {
    out.push_str("## Checklist\n");
    for (i, item) in t.reflection_checklist.iter().enumerate() {
        let _ = writeln!(out, "{}. {item}", i + 1);
    }
    out.push('\n');
}

/// Asks the model to review `spec` against the checklist and the ERC findings.
pub fn assemble_reflection_prompt(t: &PromptTemplate, spec: &DeviceSpec, last_erc: &ErcReport) -> String {
    let mut out = String::new();
    header(&mut out, t);
    out.push_str("Review the device below for the common errors in the checklist and fix every one you find.\n\n");
    checklist(&mut out, t);
    let _ = write!(out, "## Current device\n```json\n{}```\n\n", prompt_document(spec));
    if let Some(code) = &spec.code {
        let _ = write!(out, "```cpp\n{}\n```\n\n", code.source.trim_end());
    }
    out.push_str("## Rule check findings\n");
    if last_erc.findings.is_empty() {
        out.push_str("none\n");
    } else {
        for f in &last_erc.findings {
            let text = explain(f).unwrap_or_else(|_| f.message.clone());
            let _ = writeln!(out, "- [{}] {text}", f.rule_id);
        }
    }
    let _ = write!(
        out,
        "\n## Instructions\nIf you find errors, answer with the complete corrected device in the output format. \
         If there is nothing left to fix, answer with {} and nothing else.\n",
        t.stop_token
    );
    out
}

/// Prompt for a clarification turn on an existing device.
pub fn assemble_refine_prompt(t: &PromptTemplate, current: &DeviceSpec, user_text: &str) -> String {
    let mut out = String::new();
    header(&mut out, t);
    let _ = write!(out, "## Current device\nDescription: {}\n\n```json\n{}```\n\n", current.description.trim(), prompt_document(current));
    if let Some(code) = &current.code {
        let _ = write!(out, "```cpp\n{}\n```\n\n", code.source.trim_end());
    }
    let _ = write!(
        out,
        "## Requested change\n{}\n\nAnswer with the complete revised device in the output format.\n",
        user_text.trim()
    );
    out
}

/// Follow-up when a response could not be parsed at all.
pub fn assemble_repair_prompt(t: &PromptTemplate, description: &str, problems: &[String]) -> String {
    let mut out = String::new();
    header(&mut out, t);
    let _ = write!(out, "## Task\nDescription: {}\n\n## Problems with your last answer\n", description.trim());
    for p in problems {
        let _ = writeln!(out, "- {p}");
    }
    out.push_str("\nAnswer again with the complete device in the output format.\n");
    out
}
