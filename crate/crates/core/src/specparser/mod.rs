//! Extraction of a [`DeviceSpec`] from raw model output.
//!
//! Model responses mix prose, JSON (fenced or bare, often with comments and
//! trailing commas) and Markdown code fences. [`parse_device_spec`] pulls the
//! four sections out of whatever blocks are present and reports every
//! problem as a [`ParseDiagnostic`] pointing into the input.

mod blocks;
mod endpoint;
mod repair;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::devicespec::{BomItem, CodeArtifact, Connection, DeviceSpec, PartRef, PinEntry, Provenance};

pub use blocks::{extract_blocks, CodeFence, RawBlocks, StructuredBlock};
pub use endpoint::{is_range_endpoint, is_range_token, parse_pin_endpoint, EndpointError};
pub use repair::{repair_json, Repair, RepairKind};

/// Half-open byte range into the parsed input, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    fn offset(self, by: usize) -> Self {
        Span::new(self.start + by, self.end + by)
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub span: Span,
}

impl ParseDiagnostic {
    pub fn error(code: &str, message: impl Into<String>, span: Span) -> Self {
        ParseDiagnostic {
            severity: Severity::Error,
            code: code.to_string(),
            message: message.into(),
            span,
        }
    }

    pub fn warning(code: &str, message: impl Into<String>, span: Span) -> Self {
        ParseDiagnostic {
            severity: Severity::Warning,
            ..ParseDiagnostic::error(code, message, span)
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("no parsable device-spec section in response ({} diagnostic(s))", diagnostics.len())]
    NoParsableContent { diagnostics: Vec<ParseDiagnostic> },
}

impl ParseError {
    pub fn diagnostics(&self) -> &[ParseDiagnostic] {
        match self {
            ParseError::NoParsableContent { diagnostics } => diagnostics,
        }
    }
}

pub type ParseOutcome = (DeviceSpec, Vec<ParseDiagnostic>);

const BOM_KEYS: &[&str] = &["bill_of_materials", "bom", "billOfMaterials", "bill of materials", "parts", "components"];
const PINOUT_KEYS: &[&str] = &["pinouts", "pinout", "pins"];
const SCHEMATIC_KEYS: &[&str] = &["schematic", "netlist", "connections"];
const CODE_KEYS: &[&str] = &["code", "microcontroller_code"];
const CPP_INFO: &[&str] = &["c", "cpp", "c++", "cxx", "cc", "h", "hpp", "arduino", "ino"];

fn lookup<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(*k))
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// A parsed structured block with the data needed to point back into the input.
struct Block<'a> {
    text: &'a str,
    span: Span,
}

impl Block<'_> {
    /// Span of the first quoted occurrence of `needle` in the block, falling
    /// back to the whole block.
    fn locate(&self, needle: &str) -> Span {
        let quoted = serde_json::to_string(needle).unwrap_or_default();
        self.text
            .find(&quoted)
            .map(|p| Span::new(p, p + quoted.len()).offset(self.span.start))
            .unwrap_or(self.span)
    }
}

#[derive(Default)]
struct Sections {
    bom: bool,
    pinouts: bool,
    schematic: bool,
    code: bool,
}

impl Sections {
    fn any(&self) -> bool {
        self.bom || self.pinouts || self.schematic || self.code
    }
}

struct Assembler<'a> {
    spec: DeviceSpec,
    diags: Vec<ParseDiagnostic>,
    found: Sections,
    json_code: Option<(CodeArtifact, Span)>,
    raw: &'a str,
}

enum Shape {
    Bom,
    Pinouts,
    Schematic,
    Code,
}

fn classify(v: &Value) -> Option<Shape> {
    match v {
        Value::Array(items) if !items.is_empty() => {
            let first = &items[0];
            match first {
                Value::Object(o) if o.contains_key("from") || o.contains_key("to") => Some(Shape::Schematic),
                Value::Object(o)
                    if (o.contains_key("ref") || o.contains_key("name") || o.contains_key("designator"))
                        && (o.contains_key("part_type") || o.contains_key("type")) =>
                {
                    Some(Shape::Bom)
                }
                Value::String(s) if split_connection_line(s).is_some() => Some(Shape::Schematic),
                Value::Array(pair) if pair.len() == 2 => Some(Shape::Schematic),
                _ => None,
            }
        }
        Value::Object(o) if o.contains_key("source") => Some(Shape::Code),
        Value::Object(o) if !o.is_empty() && o.values().all(Value::is_array) => Some(Shape::Pinouts),
        _ => None,
    }
}

const ARROWS: &[&str] = &["<->", "<-->", "\u{2194}", "-->", "->", "\u{2192}", "=>", " -- ", " to "];

fn split_connection_line(s: &str) -> Option<(&str, &str)> {
    ARROWS.iter().find_map(|a| s.split_once(a))
}

impl<'a> Assembler<'a> {
    fn new(raw: &'a str) -> Self {
        Assembler {
            spec: DeviceSpec::default(),
            diags: Vec::new(),
            found: Sections::default(),
            json_code: None,
            raw,
        }
    }

    fn duplicate(&mut self, what: &str, block: &Block) {
        self.diags.push(ParseDiagnostic::warning(
            "DuplicateSection",
            format!("{what} section appears more than once; the first one is used"),
            block.span,
        ));
    }

    fn structured(&mut self, sb: &StructuredBlock) {
        let block = Block { text: &sb.text, span: sb.span };
        let (fixed, repairs) = repair_json(&sb.text);
        for r in repairs {
            let what = match r.kind {
                RepairKind::LineComment => "removed a // comment",
                RepairKind::TrailingComma => "removed a trailing comma",
            };
            self.diags.push(ParseDiagnostic::warning(
                "Repaired",
                what,
                Span::new(r.start, r.end).offset(sb.span.start),
            ));
        }
        let value: Value = match serde_json::from_str(&fixed) {
            Ok(v) => v,
            Err(e) => {
                let at = byte_offset(&fixed, e.line(), e.column()).min(sb.text.len());
                self.diags.push(ParseDiagnostic::error(
                    "InvalidJson",
                    format!("structured block does not parse: {e}"),
                    Span::new(at, (at + 1).min(sb.text.len()).max(at)).offset(sb.span.start),
                ));
                return;
            }
        };
        match &value {
            Value::Object(o) if has_any_section_key(o) => self.document(o, &block),
            other => match classify(other) {
                Some(Shape::Bom) => self.section_bom(other, &block),
                Some(Shape::Pinouts) => self.section_pinouts(other, &block),
                Some(Shape::Schematic) => self.section_schematic(other, &block),
                Some(Shape::Code) => self.section_code(other, &block),
                None => self.diags.push(ParseDiagnostic::warning(
                    "UnrecognizedBlock",
                    "structured block does not look like any device-spec section",
                    block.span,
                )),
            },
        }
    }

    fn document(&mut self, o: &Map<String, Value>, block: &Block) {
        if let Some(d) = o.get("description").and_then(text_of) {
            self.spec.description = d;
        }
        if let Some(v) = lookup(o, BOM_KEYS) {
            self.section_bom(v, block);
        }
        if let Some(v) = lookup(o, PINOUT_KEYS) {
            self.section_pinouts(v, block);
        }
        if let Some(v) = lookup(o, SCHEMATIC_KEYS) {
            self.section_schematic(v, block);
        }
        if let Some(v) = lookup(o, CODE_KEYS) {
            if !v.is_null() {
                self.section_code(v, block);
            }
        }
        if let Some(v) = o.get("provenance") {
            match serde_json::from_value::<Provenance>(v.clone()) {
                Ok(p) => self.spec.provenance = p,
                Err(e) => self.diags.push(ParseDiagnostic::warning(
                    "InvalidProvenance",
                    format!("provenance ignored: {e}"),
                    block.locate("provenance"),
                )),
            }
        }
    }

    fn section_bom(&mut self, v: &Value, block: &Block) {
        if self.found.bom {
            return self.duplicate("bill_of_materials", block);
        }
        let Some(items) = v.as_array() else {
            self.diags.push(ParseDiagnostic::error(
                "InvalidSection",
                "bill_of_materials must be an array",
                block.locate("bill_of_materials"),
            ));
            return;
        };
        self.found.bom = true;
        for item in items {
            let Some(o) = item.as_object() else {
                self.diags.push(ParseDiagnostic::error("InvalidEntry", "bill_of_materials entry is not an object", block.span));
                continue;
            };
            let Some(r) = lookup(o, &["ref", "name", "designator", "id"]).and_then(text_of) else {
                self.diags.push(ParseDiagnostic::error("InvalidEntry", "bill_of_materials entry has no ref", block.span));
                continue;
            };
            let part = match PartRef::new(r.trim()) {
                Ok(p) => p,
                Err(e) => {
                    self.diags.push(ParseDiagnostic::error("InvalidRef", e.to_string(), block.locate(&r)));
                    continue;
                }
            };
            let part_type = lookup(o, &["part_type", "type", "component", "part"]).and_then(text_of);
            let Some(part_type) = part_type.filter(|t| !t.trim().is_empty()) else {
                self.diags.push(ParseDiagnostic::error(
                    "InvalidEntry",
                    format!("bill_of_materials entry {part} has no part_type"),
                    block.locate(&r),
                ));
                continue;
            };
            self.spec.bom.push(BomItem {
                part,
                part_type,
                value: lookup(o, &["value"]).and_then(text_of),
                note: lookup(o, &["note", "notes", "purpose", "comment"]).and_then(text_of),
            });
        }
    }

    fn section_pinouts(&mut self, v: &Value, block: &Block) {
        if self.found.pinouts {
            return self.duplicate("pinouts", block);
        }
        let Some(map) = v.as_object() else {
            self.diags.push(ParseDiagnostic::error("InvalidSection", "pinouts must be an object", block.locate("pinouts")));
            return;
        };
        self.found.pinouts = true;
        for (key, pins) in map {
            let part = match PartRef::new(key.trim()) {
                Ok(p) => p,
                Err(e) => {
                    self.diags.push(ParseDiagnostic::error("InvalidRef", e.to_string(), block.locate(key)));
                    continue;
                }
            };
            self.spec.pinouts.declare(part.clone());
            let entries: Vec<PinEntry> = match pins {
                Value::Array(list) => list
                    .iter()
                    .filter_map(|p| match p {
                        Value::Object(o) => lookup(o, &["pin", "name"]).and_then(text_of).map(|pin| PinEntry {
                            pin,
                            note: lookup(o, &["note", "function", "description"]).and_then(text_of),
                        }),
                        other => text_of(other).map(PinEntry::new),
                    })
                    .collect(),
                Value::Object(o) => o
                    .iter()
                    .map(|(pin, note)| PinEntry {
                        pin: pin.clone(),
                        note: text_of(note),
                    })
                    .collect(),
                _ => {
                    self.diags.push(ParseDiagnostic::error(
                        "InvalidEntry",
                        format!("pinout of {part} is not a list"),
                        block.locate(key),
                    ));
                    continue;
                }
            };
            for e in entries {
                let name = e.pin.clone();
                if !self.spec.pinouts.push(part.clone(), e) {
                    self.diags.push(ParseDiagnostic::warning(
                        "DuplicatePin",
                        format!("pin {name:?} of {part} is empty or listed twice; ignored"),
                        block.locate(&name),
                    ));
                }
            }
        }
    }

    fn section_schematic(&mut self, v: &Value, block: &Block) {
        if self.found.schematic {
            return self.duplicate("schematic", block);
        }
        let Some(items) = v.as_array() else {
            self.diags.push(ParseDiagnostic::error("InvalidSection", "schematic must be an array", block.locate("schematic")));
            return;
        };
        self.found.schematic = true;
        for item in items {
            let (from, to, note, needle) = match item {
                Value::Object(o) => {
                    let from = lookup(o, &["from", "a", "source"]).and_then(text_of);
                    let to = lookup(o, &["to", "b", "target"]).and_then(text_of);
                    let note = lookup(o, &["note", "notes", "purpose", "comment"]).and_then(text_of);
                    match (from, to) {
                        (Some(f), Some(t)) => {
                            let needle = f.clone();
                            (f, t, note, needle)
                        }
                        _ => {
                            self.diags.push(ParseDiagnostic::error(
                                "InvalidEntry",
                                "schematic entry needs both from and to",
                                block.span,
                            ));
                            continue;
                        }
                    }
                }
                Value::String(line) => match split_connection_line(line) {
                    Some((f, t)) => (f.to_string(), t.to_string(), None, line.clone()),
                    None => {
                        self.diags.push(ParseDiagnostic::error(
                            "MalformedEndpoint",
                            format!("schematic line {line:?} is not of the form A -> B"),
                            block.locate(line),
                        ));
                        continue;
                    }
                },
                Value::Array(pair) if pair.len() == 2 => match (text_of(&pair[0]), text_of(&pair[1])) {
                    (Some(f), Some(t)) => {
                        let needle = f.clone();
                        (f, t, None, needle)
                    }
                    _ => {
                        self.diags.push(ParseDiagnostic::error("InvalidEntry", "schematic pair must hold two strings", block.span));
                        continue;
                    }
                },
                _ => {
                    self.diags.push(ParseDiagnostic::error("InvalidEntry", "unrecognized schematic entry", block.span));
                    continue;
                }
            };
            let a = parse_pin_endpoint(&from);
            let b = parse_pin_endpoint(&to);
            match (a, b) {
                (Ok(a), Ok(b)) => match Connection::new(a, b) {
                    Ok(mut c) => {
                        c.note = note;
                        self.spec.connections.push(c);
                    }
                    Err(e) => self.diags.push(ParseDiagnostic::error("SelfLoop", e.to_string(), block.locate(&needle))),
                },
                (a, b) => {
                    let errs: Vec<EndpointError> = [a.err(), b.err()].into_iter().flatten().collect();
                    let code = if errs.iter().any(|e| matches!(e, EndpointError::RangeShortcut(_))) {
                        "RangeShortcut"
                    } else {
                        errs[0].code()
                    };
                    let msg = errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
                    self.diags.push(ParseDiagnostic::error(
                        code,
                        format!("connection {from} -> {to} rejected: {msg}"),
                        block.locate(&needle),
                    ));
                }
            }
        }
    }

    fn section_code(&mut self, v: &Value, block: &Block) {
        if self.json_code.is_some() {
            return self.duplicate("code", block);
        }
        let artifact = match v {
            Value::String(s) => Some(CodeArtifact::new(s.clone())),
            Value::Object(o) => lookup(o, &["source", "code"]).and_then(text_of).map(|source| CodeArtifact {
                language_tag: lookup(o, &["language_tag", "language"])
                    .and_then(text_of)
                    .unwrap_or_else(|| "arduino-cpp".to_string()),
                source,
                note: lookup(o, &["note", "notes"]).and_then(text_of),
            }),
            _ => None,
        };
        match artifact {
            Some(a) => self.json_code = Some((a, block.span)),
            None => self.diags.push(ParseDiagnostic::error(
                "InvalidSection",
                "code section must be a string or {language_tag, source}",
                block.locate("code"),
            )),
        }
    }

    fn choose_code(&mut self, fences: &[CodeFence]) {
        let is_cpp = |f: &&CodeFence| {
            let lang = f.info_string.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
            CPP_INFO.contains(&lang.as_str())
        };
        let from_fence = |f: &CodeFence| CodeArtifact::new(f.body.clone());
        let chosen = if let Some(f) = fences.iter().find(is_cpp) {
            Some(from_fence(f))
        } else if let Some((a, _)) = self.json_code.take().filter(|(a, _)| !a.source.trim().is_empty()) {
            Some(a)
        } else {
            fences
                .iter()
                .filter(|f| f.info_string.is_empty())
                .max_by_key(|f| (f.body.len(), std::cmp::Reverse(f.span.start)))
                .map(from_fence)
        };
        if let Some(a) = chosen {
            self.found.code = true;
            self.spec.code = Some(a);
        }
    }

    fn finish(mut self) -> Result<ParseOutcome, ParseError> {
        let whole = Span::new(0, self.raw.len());
        for (present, name) in [
            (self.found.bom, "bill_of_materials"),
            (self.found.pinouts, "pinouts"),
            (self.found.schematic, "schematic"),
            (self.found.code, "code"),
        ] {
            if !present {
                self.diags.push(ParseDiagnostic::error(
                    "MissingSection",
                    format!("response has no {name} section"),
                    whole,
                ));
            }
        }
        if !self.found.any() {
            return Err(ParseError::NoParsableContent { diagnostics: self.diags });
        }
        self.diags.sort_by_key(|d| (d.span.start, d.span.end));
        Ok((self.spec, self.diags))
    }
}

fn has_any_section_key(o: &Map<String, Value>) -> bool {
    [BOM_KEYS, PINOUT_KEYS, SCHEMATIC_KEYS, CODE_KEYS]
        .iter()
        .any(|keys| lookup(o, keys).is_some())
        || o.contains_key("description")
}

/// serde_json reports 1-based line and column (column counts bytes).
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return off + column.saturating_sub(1).min(l.len());
        }
        off += l.len();
    }
    text.len()
}

pub const SECTION_NAMES: [&str; 4] = ["bill_of_materials", "pinouts", "schematic", "code"];

/// Sections a parse reported as absent.
pub fn missing_sections(diags: &[ParseDiagnostic]) -> Vec<&'static str> {
    SECTION_NAMES
        .into_iter()
        .filter(|n| {
            diags
                .iter()
                .any(|d| d.code == "MissingSection" && d.message == format!("response has no {n} section"))
        })
        .collect()
}

/// Assembles a device spec from a model response.
///
/// A spec is returned whenever at least one of the four sections parsed;
/// missing sections and rejected entries are reported as error diagnostics.
pub fn parse_device_spec(raw: &str) -> Result<ParseOutcome, ParseError> {
    let blocks = extract_blocks(raw);
    let mut asm = Assembler::new(raw);
    asm.diags.extend(blocks.diagnostics.iter().cloned());
    for sb in &blocks.structured_blocks {
        asm.structured(sb);
    }
    asm.choose_code(&blocks.code_fences);
    asm.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devicespec::canonical_serialize;

    const FULL: &str = r#"Here is the device.

```json
{
  "bill_of_materials": [
    {"ref": "UNO", "part_type": "Arduino Uno", "note": "controller"},
    {"ref": "R1", "part_type": "resistor", "value": "10k ohms"}, // pull-up
    {"ref": "BTN1", "part_type": "pushbutton"},
  ],
  "pinouts": {
    "UNO": ["D2", "5V", "GND"],
    "R1": [{"pin": "1"}, {"pin": "2"}],
    "BTN1": ["1", "2"]
  },
  "schematic": [
    {"from": "UNO.D2", "to": "R1.1", "note": "input"},
    "R1.1 -> BTN1.1",
    {"from": "R1.2", "to": "UNO.5V"},
    {"from": "BTN1.2", "to": "UNO.GND"}
  ]
}
```

```cpp
void setup() { pinMode(2, INPUT); }
void loop() {}
```
"#;

    #[test]
    fn full_response_has_no_errors() {
        let (spec, diags) = parse_device_spec(FULL).unwrap();
        assert!(diags.iter().all(|d| !d.is_error()), "{diags:?}");
        assert_eq!(diags.iter().filter(|d| d.code == "Repaired").count(), 2);
        assert_eq!(spec.bom.len(), 3);
        assert_eq!(spec.connections.len(), 4);
        assert_eq!(spec.bom[1].value.as_deref(), Some("10k ohms"));
        assert!(spec.code.as_ref().unwrap().source.contains("pinMode(2"));
        assert!(canonical_serialize(&spec).is_ok());
    }

    #[test]
    fn missing_code_fence() {
        let raw = FULL.split("```cpp").next().unwrap();
        let (spec, diags) = parse_device_spec(raw).unwrap();
        assert!(spec.code.is_none());
        let errors: Vec<_> = diags.iter().filter(|d| d.is_error()).collect();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].code, "MissingSection");
    }

    #[test]
    fn range_line_rejected() {
        let raw = r#"```json
{"bill_of_materials": [], "pinouts": {}, "schematic": ["UNO.D2-D5 → LED1..LED4", {"from": "UNO.D6", "to": "LED5.anode"}]}
```"#;
        let (spec, diags) = parse_device_spec(raw).unwrap();
        assert_eq!(spec.connections.len(), 1);
        let range: Vec<_> = diags.iter().filter(|d| d.code == "RangeShortcut").collect();
        assert_eq!(range.len(), 1);
        assert!(range[0].is_error());
        assert!(raw[range[0].span.range()].contains("UNO.D2-D5"));
    }

    #[test]
    fn prose_only_is_no_content() {
        let err = parse_device_spec("I cannot help with that.").unwrap_err();
        assert_eq!(err.diagnostics().len(), 4);
    }

    #[test]
    fn four_separate_blocks_assigned_by_shape() {
        let raw = "BOM:\n```json\n[{\"ref\": \"LED1\", \"type\": \"LED\"}]\n```\nPins:\n```json\n{\"LED1\": [\"anode\", \"cathode\"]}\n```\nWiring:\n```json\n[[\"LED1.anode\", \"LED1.cathode\"]]\n```\n```arduino\nvoid loop(){}\n```\n";
        let (spec, diags) = parse_device_spec(raw).unwrap();
        assert!(diags.iter().all(|d| !d.is_error()), "{diags:?}");
        assert_eq!(spec.bom.len(), 1);
        assert_eq!(spec.pinouts.len(), 1);
        assert_eq!(spec.connections.len(), 1);
        assert!(spec.code.is_some());
    }

    #[test]
    fn invalid_json_points_into_block() {
        let raw = "```json\n{\"bill_of_materials\": [ {\"ref\": } ]}\n```\n";
        let err = parse_device_spec(raw).unwrap_err();
        let bad = err.diagnostics().iter().find(|d| d.code == "InvalidJson").unwrap();
        assert!(bad.span.start >= 8 && bad.span.end <= raw.len());
    }

    #[test]
    fn cpp_fence_beats_longer_unlabeled() {
        let raw = "```json\n{\"code\": \"// see below\"}\n```\n```\nlong long long long unlabeled body\n```\n```cpp\nshort();\n```\n";
        let (spec, _) = parse_device_spec(raw).unwrap();
        assert_eq!(spec.code.unwrap().source, "short();");
    }

    #[test]
    fn diagnostics_serialize_with_span_pair() {
        let d = ParseDiagnostic::error("X", "m", Span::new(3, 7));
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["span"], serde_json::json!([3, 7]));
        assert_eq!(v["severity"], "error");
    }
}
