//! The canonical `.device.json` document.
//!
//! Top-level keys appear in the order `description`, `bill_of_materials`,
//! `pinouts`, `schematic`, `code`, `provenance`, with two-space indentation
//! and arrays in declaration order. The output ends with a newline.

use thiserror::Error;

use super::{validate, DeviceSpec, StructuralFinding};

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("spec has {} structural finding(s); first: {}", .0.len(), .0[0])]
    InvalidSpec(Vec<StructuralFinding>),
    #[error("malformed device document: {0}")]
    Schema(String),
}

/// Renders the document without checking structure. Used for prompts and
/// round artifacts, where the spec may still be broken.
pub fn to_document(spec: &DeviceSpec) -> String {
    let mut out = serde_json::to_string_pretty(spec).expect("device spec serializes");
    out.push('\n');
    out
}

/// Renders the canonical document, refusing specs with structural findings.
pub fn canonical_serialize(spec: &DeviceSpec) -> Result<String, DocumentError> {
    let report = validate(spec);
    if !report.is_clean() {
        return Err(DocumentError::InvalidSpec(report.findings));
    }
    Ok(to_document(spec))
}

/// Strict reader for canonical documents.
pub fn from_document(text: &str) -> Result<DeviceSpec, DocumentError> {
    let spec: DeviceSpec =
        serde_json::from_str(text).map_err(|e| DocumentError::Schema(e.to_string()))?;
    for item in &spec.bom {
        if item.part_type.trim().is_empty() {
            return Err(DocumentError::Schema(format!(
                "bill_of_materials entry {} has an empty part_type",
                item.part
            )));
        }
    }
    for (part, pins) in spec.pinouts.iter() {
        let mut seen = std::collections::HashSet::new();
        for p in pins {
            let name = p.pin.trim();
            if name.is_empty() {
                return Err(DocumentError::Schema(format!("empty pin name in pinout of {part}")));
            }
            if !seen.insert(name) {
                return Err(DocumentError::Schema(format!("pin {name} listed twice for {part}")));
            }
        }
    }
    Ok(spec)
}
