//! Electrical rule checks over a [`DeviceSpec`].
//!
//! Rules are pure functions of the spec and the knowledge base. Each has a
//! stable id; findings are sorted by rule id, then locus.

pub mod codescan;
mod rules;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devicespec::{validate, DeviceSpec, Net, PartRef, PinRef, StructuralFinding};
use crate::partsdb::{ComponentRecord, KnowledgeBase, PinRole};
pub use crate::specparser::Severity;

pub const E_POWER: &str = "E-POWER";
pub const E_RANGE: &str = "E-RANGE";
pub const E_DANGLE: &str = "E-DANGLE";
pub const E_SHORT: &str = "E-SHORT";
pub const E_LED_RESISTOR: &str = "E-LED-RESISTOR";
pub const W_PULLUP: &str = "W-PULLUP";
pub const W_FLOAT_INPUT: &str = "W-FLOAT-INPUT";
pub const E_DUP_REF: &str = "E-DUP-REF";
pub const W_CODE_PIN: &str = "W-CODE-PIN";

/// Registered rule ids, in evaluation order.
pub const RULES: &[&str] = &[
    E_POWER,
    E_RANGE,
    E_DANGLE,
    E_SHORT,
    E_LED_RESISTOR,
    W_PULLUP,
    W_FLOAT_INPUT,
    E_DUP_REF,
    W_CODE_PIN,
];

pub fn is_registered(rule_id: &str) -> bool {
    RULES.contains(&rule_id)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    Spec,
    Part(PartRef),
    Pin(PinRef),
    /// 1-based line of the code artifact.
    CodeLine(usize),
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locus::Spec => f.write_str("spec"),
            Locus::Part(p) => write!(f, "{p}"),
            Locus::Pin(p) => write!(f, "{p}"),
            Locus::CodeLine(n) => write!(f, "code line {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: String,
    pub severity: Severity,
    pub message: String,
    pub locus: Locus,
}

impl Finding {
    fn new(rule_id: &str, locus: Locus, message: impl Into<String>) -> Self {
        let severity = if rule_id.starts_with('W') { Severity::Warning } else { Severity::Error };
        Finding {
            rule_id: rule_id.to_string(),
            severity,
            message: message.into(),
            locus,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = if self.is_error() { "error" } else { "warning" };
        write!(f, "{sev} {} at {}: {}", self.rule_id, self.locus, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErcReport {
    pub findings: Vec<Finding>,
    pub rules_run: Vec<String>,
    pub clean: bool,
    /// BOM parts whose type is not in the knowledge base; KB-dependent rules
    /// skip them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved_parts: Vec<PartRef>,
}

impl ErcReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.is_error())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| !f.is_error())
    }

    pub fn by_rule<'a>(&'a self, rule_id: &'a str) -> impl Iterator<Item = &'a Finding> + 'a {
        self.findings.iter().filter(move |f| f.rule_id == rule_id)
    }
}

#[derive(Debug, Error)]
pub enum ErcError {
    #[error("spec has {} structural finding(s); run validate first", .0.len())]
    PrereqFailed(Vec<StructuralFinding>),
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
}

/// Precomputed view of a spec shared by all rules.
pub(crate) struct Ctx<'a> {
    pub spec: &'a DeviceSpec,
    pub nets: Vec<Net>,
    pub net_of: HashMap<PinRef, usize>,
    pub records: BTreeMap<PartRef, &'a ComponentRecord>,
    /// Pin names per part, from pinouts and connection endpoints.
    pub pins_of: BTreeMap<PartRef, BTreeSet<String>>,
    pub structural: Vec<StructuralFinding>,
}

impl<'a> Ctx<'a> {
    fn new(spec: &'a DeviceSpec, kb: &'a KnowledgeBase) -> Self {
        let nets = spec.nets();
        let mut net_of = HashMap::new();
        for (i, n) in nets.iter().enumerate() {
            for m in &n.members {
                net_of.insert(m.clone(), i);
            }
        }
        let mut records = BTreeMap::new();
        for item in &spec.bom {
            if let Some(r) = kb.lookup(&item.part_type) {
                records.entry(item.part.clone()).or_insert(r);
            }
        }
        let mut pins_of: BTreeMap<PartRef, BTreeSet<String>> = BTreeMap::new();
        for (part, entries) in spec.pinouts.iter() {
            pins_of
                .entry(part.clone())
                .or_default()
                .extend(entries.iter().map(|e| e.pin.clone()));
        }
        for c in &spec.connections {
            for ep in c.endpoints() {
                pins_of.entry(ep.part.clone()).or_default().insert(ep.pin.clone());
            }
        }
        Ctx {
            spec,
            nets,
            net_of,
            records,
            pins_of,
            structural: validate(spec).findings,
        }
    }

    pub fn record(&self, part: &PartRef) -> Option<&'a ComponentRecord> {
        self.records.get(part).copied()
    }

    pub fn role(&self, pin: &PinRef) -> Option<PinRole> {
        self.record(&pin.part)?.resolve_pin(&pin.pin).map(|p| p.role)
    }

    pub fn is_supply(&self, part: &PartRef) -> bool {
        self.record(part).is_some_and(|r| r.is_supply_source())
    }

    /// Spec pins of `part` that resolve to the KB pin `canonical`.
    pub fn pins_for(&self, part: &PartRef, canonical: &str) -> Vec<PinRef> {
        let Some(rec) = self.record(part) else { return Vec::new() };
        self.pins_of
            .get(part)
            .into_iter()
            .flatten()
            .filter(|p| rec.normalize_pin(p) == Some(canonical))
            .filter_map(|p| PinRef::new(part.clone(), p.clone()).ok())
            .collect()
    }

    pub fn spec_pins(&self, part: &PartRef) -> Vec<PinRef> {
        self.pins_of
            .get(part)
            .into_iter()
            .flatten()
            .filter_map(|p| PinRef::new(part.clone(), p.clone()).ok())
            .collect()
    }

    pub fn net(&self, pin: &PinRef) -> Option<usize> {
        self.net_of.get(pin).copied()
    }
}

fn select_rules(rules: Option<&[String]>) -> Result<Vec<&'static str>, ErcError> {
    let Some(subset) = rules else { return Ok(RULES.to_vec()) };
    for r in subset {
        if !is_registered(r) {
            return Err(ErcError::UnknownRule(r.clone()));
        }
    }
    Ok(RULES.iter().copied().filter(|r| subset.iter().any(|s| s == r)).collect())
}

/// Runs the registered rules, or the given subset, on a structurally valid spec.
pub fn run_erc(spec: &DeviceSpec, kb: &KnowledgeBase, rules: Option<&[String]>) -> Result<ErcReport, ErcError> {
    let selected = select_rules(rules)?;
    let structural = validate(spec).findings;
    if !structural.is_empty() {
        return Err(ErcError::PrereqFailed(structural));
    }
    Ok(evaluate(spec, kb, &selected))
}

/// Like [`run_erc`] with all rules, but total: structural problems are
/// reported as E-DANGLE findings instead of failing.
pub fn check(spec: &DeviceSpec, kb: &KnowledgeBase) -> ErcReport {
    evaluate(spec, kb, RULES)
}

fn evaluate(spec: &DeviceSpec, kb: &KnowledgeBase, selected: &[&str]) -> ErcReport {
    let ctx = Ctx::new(spec, kb);
    let mut findings = Vec::new();
    for &rule in selected {
        findings.extend(rules::run(rule, &ctx));
    }
    findings.sort_by(|a, b| (&a.rule_id, &a.locus, &a.message).cmp(&(&b.rule_id, &b.locus, &b.message)));
    findings.dedup();
    let unresolved_parts: BTreeSet<PartRef> = spec
        .bom
        .iter()
        .filter(|b| kb.lookup(&b.part_type).is_none())
        .map(|b| b.part.clone())
        .collect();
    ErcReport {
        clean: !findings.iter().any(Finding::is_error),
        findings,
        rules_run: selected.iter().map(|s| s.to_string()).collect(),
        unresolved_parts: unresolved_parts.into_iter().collect(),
    }
}

/// Remediation text for a finding.
pub fn explain(finding: &Finding) -> Result<String, ErcError> {
    let at = &finding.locus;
    let text = match finding.rule_id.as_str() {
        E_POWER => format!(
            "{}. Connect the supply pin of {at} directly to the matching power or ground pin of the \
             board or battery (for example UNO.5V and UNO.GND) so the part is actually powered.",
            finding.message
        ),
        E_RANGE => format!(
            "{}. Replace the range with one connection per pin pair; each schematic entry must join \
             exactly two pins.",
            finding.message
        ),
        E_DANGLE => format!(
            "{}. Add the part to the bill of materials and list the pin in its pinout, or fix the \
             connection so it names an existing pin.",
            finding.message
        ),
        E_SHORT => format!(
            "{}. A supply pin and a ground pin share a net at {at}; remove the direct connection and \
             route power through the component it is meant to feed.",
            finding.message
        ),
        E_LED_RESISTOR => format!(
            "{}. Insert a current-limiting resistor (220 to 1k ohm is typical) in series between the \
             driving pin and {at}.",
            finding.message
        ),
        W_PULLUP => format!(
            "{}. Add a pull-up resistor (about 10k ohm) from the signal net of {at} to 5V, or enable \
             the internal one with pinMode(pin, INPUT_PULLUP).",
            finding.message
        ),
        W_FLOAT_INPUT => format!(
            "{}. Pin {at} is required for the part to work but is not in any net; connect it or \
             remove the part.",
            finding.message
        ),
        E_DUP_REF => format!(
            "{}. Give every bill-of-materials entry a unique reference and update the pinouts and \
             schematic to match.",
            finding.message
        ),
        W_CODE_PIN => format!(
            "{}. Either wire the microcontroller pin used at {at} into the schematic or change the \
             code to use the pin the schematic connects.",
            finding.message
        ),
        other => return Err(ErcError::UnknownRule(other.to_string())),
    };
    Ok(text)
}

#[cfg(test)]
mod tests;
