//! Device specification data model.
//!
//! A [`DeviceSpec`] is the full generated design for one device: a bill of
//! materials, the pinout of each part, the pin-to-pin connections that make
//! up the schematic, and the microcontroller code. Connections are pairwise
//! edges; nets are always derived from them with [`build_nets`].
//!
//! All comparisons in this module are exact and case-preserving. Name
//! normalization lives in [`crate::partsdb`].

mod document;
mod nets;

use std::cmp::Ordering;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{canonical_serialize, from_document, to_document, DocumentError};
pub use nets::{build_nets, Net, PinUnionFind};

/// Errors raised when constructing model values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("part ref must not be empty")]
    EmptyPartRef,
    #[error("part ref {0:?} contains whitespace")]
    WhitespaceInPartRef(String),
    #[error("part ref {0:?} contains '.', which is reserved as the pin separator")]
    DotInPartRef(String),
    #[error("pin name must not be empty")]
    EmptyPin,
    #[error("endpoint {0:?} has no '.' separating part and pin")]
    MissingSeparator(String),
    #[error("connection joins {0} to itself")]
    SelfLoop(String),
}

/// Short identifier of a part in the schematic, e.g. `R1` or `UNO`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PartRef(String);

impl PartRef {
    pub fn new(s: impl Into<String>) -> Result<Self, ModelError> {
        let s = s.into();
        if s.is_empty() {
            return Err(ModelError::EmptyPartRef);
        }
        if s.chars().any(char::is_whitespace) {
            return Err(ModelError::WhitespaceInPartRef(s));
        }
        if s.contains('.') {
            return Err(ModelError::DotInPartRef(s));
        }
        Ok(PartRef(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PartRef {
    type Error = ModelError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        PartRef::new(s)
    }
}

impl From<PartRef> for String {
    fn from(r: PartRef) -> String {
        r.0
    }
}

impl fmt::Display for PartRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One entry of the bill of materials.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BomItem {
    #[serde(rename = "ref")]
    pub part: PartRef,
    pub part_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BomItem {
    pub fn new(part: PartRef, part_type: impl Into<String>) -> Self {
        BomItem {
            part,
            part_type: part_type.into(),
            value: None,
            note: None,
        }
    }

    pub fn with_value(mut self, value: impl Into<String>) -> Self {
        self.value = Some(value.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A pin on a specific part, written `PART.PIN`.
///
/// Ordering is the lexicographic order of the `PART.PIN` string form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PinRef {
    pub part: PartRef,
    pub pin: String,
}

impl PinRef {
    pub fn new(part: PartRef, pin: impl Into<String>) -> Result<Self, ModelError> {
        let pin = pin.into();
        let pin = pin.trim();
        if pin.is_empty() {
            return Err(ModelError::EmptyPin);
        }
        Ok(PinRef {
            part,
            pin: pin.to_string(),
        })
    }

    /// Parses the `PART.PIN` form, splitting at the first `.`.
    ///
    /// This is the exact inverse of `Display`; the lenient form used for model
    /// output lives in [`crate::specparser::parse_pin_endpoint`].
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let (part, pin) = s
            .split_once('.')
            .ok_or_else(|| ModelError::MissingSeparator(s.to_string()))?;
        PinRef::new(PartRef::new(part)?, pin)
    }

    fn key_bytes(&self) -> impl Iterator<Item = u8> + '_ {
        self.part
            .0
            .bytes()
            .chain(std::iter::once(b'.'))
            .chain(self.pin.bytes())
    }
}

impl Ord for PinRef {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.part.0.as_bytes(), other.part.0.as_bytes());
        let n = a.len().min(b.len());
        match a[..n].cmp(&b[..n]) {
            Ordering::Equal if a.len() == b.len() => self.pin.cmp(&other.pin),
            // one part ref is a prefix of the other; the '.' decides
            Ordering::Equal => self.key_bytes().cmp(other.key_bytes()),
            o => o,
        }
    }
}

impl PartialOrd for PinRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PinRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.part, self.pin)
    }
}

impl Serialize for PinRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PinRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PinRef::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// An undirected pin-to-pin edge of the schematic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawConnection")]
pub struct Connection {
    #[serde(rename = "from")]
    pub a: PinRef,
    #[serde(rename = "to")]
    pub b: PinRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Deserialize)]
struct RawConnection {
    from: PinRef,
    to: PinRef,
    #[serde(default)]
    note: Option<String>,
}

impl TryFrom<RawConnection> for Connection {
    type Error = ModelError;
    fn try_from(raw: RawConnection) -> Result<Self, Self::Error> {
        let mut c = Connection::new(raw.from, raw.to)?;
        c.note = raw.note;
        Ok(c)
    }
}

impl Connection {
    pub fn new(a: PinRef, b: PinRef) -> Result<Self, ModelError> {
        if a == b {
            return Err(ModelError::SelfLoop(a.to_string()));
        }
        Ok(Connection { a, b, note: None })
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn endpoints(&self) -> [&PinRef; 2] {
        [&self.a, &self.b]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinEntry {
    pub pin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PinEntry {
    pub fn new(pin: impl Into<String>) -> Self {
        PinEntry {
            pin: pin.into(),
            note: None,
        }
    }
}

/// Pins listed for each part, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PinoutMap {
    entries: IndexMap<PartRef, Vec<PinEntry>>,
}

impl PinoutMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a pin to a part's list. Returns `false` (and leaves the map
    /// unchanged) when the trimmed name is empty or already listed.
    pub fn push(&mut self, part: PartRef, entry: PinEntry) -> bool {
        let name = entry.pin.trim();
        if name.is_empty() {
            return false;
        }
        let list = self.entries.entry(part).or_default();
        if list.iter().any(|e| e.pin.trim() == name) {
            return false;
        }
        list.push(entry);
        true
    }

    /// Declares a part with an empty pin list if it is not yet present.
    pub fn declare(&mut self, part: PartRef) {
        self.entries.entry(part).or_default();
    }

    pub fn pins(&self, part: &PartRef) -> Option<&[PinEntry]> {
        self.entries.get(part).map(Vec::as_slice)
    }

    pub fn has_pin(&self, pin: &PinRef) -> bool {
        self.pins(&pin.part)
            .is_some_and(|list| list.iter().any(|e| e.pin.trim() == pin.pin))
    }

    pub fn remove_pin(&mut self, pin: &PinRef) -> bool {
        match self.entries.get_mut(&pin.part) {
            Some(list) => {
                let before = list.len();
                list.retain(|e| e.pin.trim() != pin.pin);
                list.len() != before
            }
            None => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PartRef, &[PinEntry])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn parts(&self) -> impl Iterator<Item = &PartRef> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn default_language_tag() -> String {
    "arduino-cpp".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeArtifact {
    #[serde(default = "default_language_tag")]
    pub language_tag: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CodeArtifact {
    pub fn new(source: impl Into<String>) -> Self {
        CodeArtifact {
            language_tag: default_language_tag(),
            source: source.into(),
            note: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub prompt_digest: Option<String>,
    #[serde(default)]
    pub reflection_iterations: u32,
    #[serde(default)]
    pub created_at: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceSpec {
    #[serde(default)]
    pub description: String,
    #[serde(rename = "bill_of_materials", default)]
    pub bom: Vec<BomItem>,
    #[serde(default)]
    pub pinouts: PinoutMap,
    #[serde(rename = "schematic", default)]
    pub connections: Vec<Connection>,
    #[serde(default)]
    pub code: Option<CodeArtifact>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl DeviceSpec {
    pub fn new(description: impl Into<String>) -> Self {
        DeviceSpec {
            description: description.into(),
            ..Default::default()
        }
    }

    /// First BOM item with the given ref.
    pub fn bom_item(&self, part: &PartRef) -> Option<&BomItem> {
        self.bom.iter().find(|b| &b.part == part)
    }

    pub fn has_part(&self, part: &PartRef) -> bool {
        self.bom_item(part).is_some()
    }

    pub fn nets(&self) -> Vec<Net> {
        build_nets(&self.connections)
    }
}

/// A structural problem with a connection endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuralFinding {
    UndeclaredPart { connection: usize, endpoint: PinRef },
    MissingPin { connection: usize, endpoint: PinRef },
}

impl StructuralFinding {
    pub fn endpoint(&self) -> &PinRef {
        match self {
            StructuralFinding::UndeclaredPart { endpoint, .. }
            | StructuralFinding::MissingPin { endpoint, .. } => endpoint,
        }
    }

    pub fn connection(&self) -> usize {
        match self {
            StructuralFinding::UndeclaredPart { connection, .. }
            | StructuralFinding::MissingPin { connection, .. } => *connection,
        }
    }
}

impl fmt::Display for StructuralFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructuralFinding::UndeclaredPart { connection, endpoint } => write!(
                f,
                "undeclared part {} (connection {}, endpoint {})",
                endpoint.part, connection, endpoint
            ),
            StructuralFinding::MissingPin { connection, endpoint } => write!(
                f,
                "pin {} is not listed in the pinout of {} (connection {})",
                endpoint.pin, endpoint.part, connection
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<StructuralFinding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks every connection endpoint against the BOM and the pinouts.
///
/// An endpoint whose part is missing from the BOM is reported once as an
/// undeclared part; its pin is not checked further.
pub fn validate(spec: &DeviceSpec) -> ValidationReport {
    let mut findings = Vec::new();
    for (i, c) in spec.connections.iter().enumerate() {
        for ep in c.endpoints() {
            if !spec.has_part(&ep.part) {
                findings.push(StructuralFinding::UndeclaredPart {
                    connection: i,
                    endpoint: ep.clone(),
                });
            } else if !spec.pinouts.has_pin(ep) {
                findings.push(StructuralFinding::MissingPin {
                    connection: i,
                    endpoint: ep.clone(),
                });
            }
        }
    }
    ValidationReport { findings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pr(s: &str) -> PinRef {
        PinRef::parse(s).unwrap()
    }

    #[test]
    fn part_ref_rules() {
        assert!(PartRef::new("R1").is_ok());
        assert_eq!(PartRef::new(""), Err(ModelError::EmptyPartRef));
        assert!(matches!(PartRef::new("LED 1"), Err(ModelError::WhitespaceInPartRef(_))));
        assert!(matches!(PartRef::new("U1.A"), Err(ModelError::DotInPartRef(_))));
    }

    #[test]
    fn pin_ref_splits_at_first_dot() {
        let p = pr("UNO.D2.alt");
        assert_eq!(p.part.as_str(), "UNO");
        assert_eq!(p.pin, "D2.alt");
        assert_eq!(p.to_string(), "UNO.D2.alt");
        assert!(matches!(PinRef::parse("UNO"), Err(ModelError::MissingSeparator(_))));
        assert_eq!(PinRef::parse("UNO.  "), Err(ModelError::EmptyPin));
    }

    #[test]
    fn pin_ref_order_is_string_order() {
        let mut v = [pr("R-1.a"), pr("R.x"), pr("R10.a"), pr("R1.x")];
        v.sort();
        let strs: Vec<String> = v.iter().map(ToString::to_string).collect();
        let mut expected = strs.clone();
        expected.sort();
        assert_eq!(strs, expected);
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(
            Connection::new(pr("R1.1"), pr("R1.1")),
            Err(ModelError::SelfLoop(_))
        ));
        assert!(Connection::new(pr("R1.1"), pr("R1.2")).is_ok());
    }

    #[test]
    fn pinout_names_unique_after_trim() {
        let mut m = PinoutMap::new();
        let uno = PartRef::new("UNO").unwrap();
        assert!(m.push(uno.clone(), PinEntry::new("D2")));
        assert!(!m.push(uno.clone(), PinEntry::new(" D2 ")));
        assert!(!m.push(uno.clone(), PinEntry::new("  ")));
        assert!(m.push(uno.clone(), PinEntry::new("d2")));
        assert_eq!(m.pins(&uno).unwrap().len(), 2);
    }

    #[test]
    fn validate_empty_spec_is_clean() {
        assert!(validate(&DeviceSpec::default()).is_clean());
    }

    #[test]
    fn validate_reports_undeclared_part() {
        let mut spec = DeviceSpec::new("button");
        let uno = PartRef::new("UNO").unwrap();
        spec.bom.push(BomItem::new(uno.clone(), "Arduino Uno"));
        spec.pinouts.push(uno, PinEntry::new("D2"));
        spec.connections
            .push(Connection::new(pr("UNO.D2"), pr("BTN1.1")).unwrap());
        let report = validate(&spec);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].to_string().split(' ').take(3).collect::<Vec<_>>(), ["undeclared", "part", "BTN1"]);
    }
}
