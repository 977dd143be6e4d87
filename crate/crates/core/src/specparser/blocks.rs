use serde::{Deserialize, Serialize};

use super::repair::repair_json;
use super::{ParseDiagnostic, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredBlock {
    pub text: String,
    /// `raw[span]` is exactly `text`.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeFence {
    pub info_string: String,
    pub body: String,
    /// `raw[span]` is exactly `body`.
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawBlocks {
    pub structured_blocks: Vec<StructuredBlock>,
    pub code_fences: Vec<CodeFence>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl RawBlocks {
    pub fn is_empty(&self) -> bool {
        self.structured_blocks.is_empty() && self.code_fences.is_empty()
    }
}

const STRUCTURED_INFO: &[&str] = &["json", "json5", "jsonc"];

fn is_structured_info(info: &str) -> bool {
    let lang = info.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
    STRUCTURED_INFO.contains(&lang.as_str())
}

fn parses_as_json(text: &str) -> bool {
    let (fixed, _) = repair_json(text);
    serde_json::from_str::<serde_json::Value>(&fixed).is_ok()
}

struct Line {
    start: usize,
    /// End of content, excluding the newline.
    end: usize,
    /// Start of the following line.
    next: usize,
}

fn lines(raw: &str) -> Vec<Line> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, b) in raw.bytes().enumerate() {
        if b == b'\n' {
            out.push(Line { start, end: i, next: i + 1 });
            start = i + 1;
        }
    }
    if start < raw.len() {
        out.push(Line { start, end: raw.len(), next: raw.len() });
    }
    out
}

fn fence_marker(line: &str) -> Option<(usize, &str)> {
    let t = line.trim_start();
    let ticks = t.bytes().take_while(|&b| b == b'`').count();
    (ticks >= 3).then(|| (ticks, t[ticks..].trim()))
}

/// Finds Markdown code fences and bare JSON objects in a model response.
///
/// A fence whose info string names JSON, or an unlabeled fence whose body is
/// JSON, is a structured block. Other fences are code. Objects starting at
/// the beginning of a line outside any fence are captured when they parse.
/// If the whole input is one JSON value it is returned as a single block.
pub fn extract_blocks(raw: &str) -> RawBlocks {
    let mut blocks = RawBlocks::default();

    let trimmed = raw.trim();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        let start = raw.len() - raw.trim_start().len();
        if balanced_end(raw, start) == Some(start + trimmed.len()) && parses_as_json(trimmed) {
            blocks.structured_blocks.push(StructuredBlock {
                text: trimmed.to_string(),
                span: Span::new(start, start + trimmed.len()),
            });
            return blocks;
        }
    }

    let lines = lines(raw);
    let mut gap_start = 0;
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        let Some((ticks, info)) = fence_marker(&raw[line.start..line.end]) else {
            i += 1;
            continue;
        };
        scan_bare_objects(raw, gap_start, line.start, &mut blocks);

        let body_start = line.next;
        let mut close = None;
        let mut j = i + 1;
        while j < lines.len() {
            let l = &lines[j];
            if let Some((t, rest)) = fence_marker(&raw[l.start..l.end]) {
                if t >= ticks && rest.is_empty() {
                    close = Some(j);
                    break;
                }
            }
            j += 1;
        }
        let (body_end, resume) = match close {
            Some(j) => {
                let bytes = raw.as_bytes();
                let mut e = lines[j].start;
                if e > body_start && bytes[e - 1] == b'\n' {
                    e -= 1;
                }
                if e > body_start && bytes[e - 1] == b'\r' {
                    e -= 1;
                }
                (e, lines[j].next)
            }
            None => {
                blocks.diagnostics.push(ParseDiagnostic::warning(
                    "UnterminatedFence",
                    "code fence is not closed; captured to end of input",
                    Span::new(line.start, line.end),
                ));
                (raw.len(), raw.len())
            }
        };
        let body = &raw[body_start..body_end];
        let span = Span::new(body_start, body_end);
        let structured = is_structured_info(info)
            || (info.is_empty() && {
                let b = body.trim_start();
                (b.starts_with('{') || b.starts_with('[')) && parses_as_json(body)
            });
        if structured {
            blocks.structured_blocks.push(StructuredBlock { text: body.to_string(), span });
        } else {
            blocks.code_fences.push(CodeFence {
                info_string: info.to_string(),
                body: body.to_string(),
                span,
            });
        }
        gap_start = resume;
        i = close.map_or(lines.len(), |j| j + 1);
    }
    scan_bare_objects(raw, gap_start, raw.len(), &mut blocks);
    blocks
        .structured_blocks
        .sort_by_key(|b| b.span.start);
    blocks
}

fn scan_bare_objects(raw: &str, from: usize, to: usize, blocks: &mut RawBlocks) {
    let bytes = raw.as_bytes();
    let mut i = from;
    let mut at_line_start = from == 0 || bytes[from - 1] == b'\n';
    while i < to {
        let b = bytes[i];
        if b == b'\n' {
            at_line_start = true;
        } else if at_line_start && b == b'{' {
            if let Some(end) = balanced_end(raw, i).filter(|&e| e <= to) {
                let text = &raw[i..end];
                if parses_as_json(text) {
                    blocks.structured_blocks.push(StructuredBlock {
                        text: text.to_string(),
                        span: Span::new(i, end),
                    });
                    i = end;
                    at_line_start = false;
                    continue;
                }
            }
            at_line_start = false;
        } else if !b.is_ascii_whitespace() {
            at_line_start = false;
        }
        i += 1;
    }
}

/// End offset (exclusive) of the bracketed value opening at `start`, aware
/// of strings and `//` comments.
pub(crate) fn balanced_end(raw: &str, start: usize) -> Option<usize> {
    let bytes = raw.as_bytes();
    let mut stack: Vec<u8> = Vec::new();
    let mut in_str = false;
    let mut esc = false;
    let mut i = start;
    while i < bytes.len() {
        let b = bytes[i];
        if in_str {
            if esc {
                esc = false;
            } else if b == b'\\' {
                esc = true;
            } else if b == b'"' {
                in_str = false;
            }
        } else {
            match b {
                b'"' => in_str = true,
                b'/' if bytes.get(i + 1) == Some(&b'/') => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                    continue;
                }
                b'{' | b'[' => stack.push(b),
                b'}' | b']' => {
                    let open = stack.pop()?;
                    if (open == b'{') != (b == b'}') {
                        return None;
                    }
                    if stack.is_empty() {
                        return Some(i + 1);
                    }
                }
                _ if stack.is_empty() => return None,
                _ => {}
            }
        }
        i += 1;
    }
    None
}
