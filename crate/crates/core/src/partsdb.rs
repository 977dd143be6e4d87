//! Component knowledge base: canonical pinouts, pin aliases, criticality and
//! electrical roles.
//!
//! Names are compared after [`normalize`]: lowercase, trimmed, with all
//! whitespace and hyphens removed. There is no fuzzy matching.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NEEDS_PULLUP: &str = "needs_pullup";
pub const NEEDS_SERIES_RESISTOR: &str = "needs_series_resistor";
pub const NEEDS_EXTERNAL_HV_SUPPLY: &str = "needs_external_hv_supply";

/// Records that behave as resistances for wiring rules.
pub const RESISTIVE: &[&str] = &["resistor", "potentiometer", "photoresistor"];

static BUNDLED: &str = include_str!("../data/parts.kb.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinRole {
    Power,
    Ground,
    DigitalIo,
    AnalogIo,
    Signal,
    Nc,
}

impl PinRole {
    /// Roles that carry a signal rather than supply.
    pub fn is_signal_like(self) -> bool {
        matches!(self, PinRole::DigitalIo | PinRole::AnalogIo | PinRole::Signal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Passive,
    Input,
    Output,
    Sensor,
    Ic,
    Power,
    Logic,
    Microcontroller,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinSpec {
    pub canonical: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub critical: bool,
    pub role: PinRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub canonical_name: String,
    #[serde(default)]
    pub name_aliases: Vec<String>,
    pub category: Category,
    pub pins: Vec<PinSpec>,
    #[serde(default)]
    pub requires: Vec<String>,
}

impl ComponentRecord {
    /// Canonical pin name for `pin_name`, matched against canonical names and
    /// aliases of this component.
    pub fn normalize_pin(&self, pin_name: &str) -> Option<&str> {
        let key = normalize(pin_name);
        self.pins
            .iter()
            .find(|p| normalize(&p.canonical) == key || p.aliases.iter().any(|a| normalize(a) == key))
            .map(|p| p.canonical.as_str())
    }

    pub fn pin(&self, canonical: &str) -> Option<&PinSpec> {
        self.pins.iter().find(|p| p.canonical == canonical)
    }

    /// Spec of the pin `pin_name` resolves to.
    pub fn resolve_pin(&self, pin_name: &str) -> Option<&PinSpec> {
        self.normalize_pin(pin_name).and_then(|c| self.pin(c))
    }

    pub fn critical_pins(&self) -> impl Iterator<Item = &PinSpec> {
        self.pins.iter().filter(|p| p.critical)
    }

    pub fn requires(&self, tag: &str) -> bool {
        self.requires.iter().any(|t| t == tag)
    }

    pub fn is_supply_source(&self) -> bool {
        matches!(self.category, Category::Power | Category::Microcontroller)
    }

    pub fn is_resistive(&self) -> bool {
        RESISTIVE.contains(&self.canonical_name.as_str())
    }

    fn check(&self) -> Result<(), KbError> {
        let invalid = |msg: String| KbError::InvalidRecord {
            record: self.canonical_name.clone(),
            message: msg,
        };
        if normalize(&self.canonical_name).is_empty() {
            return Err(invalid("empty canonical_name".into()));
        }
        let mut owner: HashMap<String, &str> = HashMap::new();
        for p in &self.pins {
            let c = normalize(&p.canonical);
            if c.is_empty() {
                return Err(invalid("empty pin name".into()));
            }
            if let Some(prev) = owner.insert(c, &p.canonical) {
                return Err(invalid(format!("pin {} collides with pin {prev}", p.canonical)));
            }
        }
        for p in &self.pins {
            for a in &p.aliases {
                let k = normalize(a);
                if k.is_empty() {
                    return Err(invalid(format!("empty alias on pin {}", p.canonical)));
                }
                match owner.get(&k) {
                    Some(&o) if o == p.canonical && k == normalize(&p.canonical) => {
                        return Err(invalid(format!("pin {} lists its own name as an alias", p.canonical)))
                    }
                    Some(&o) if o != p.canonical => {
                        return Err(invalid(format!("alias {a:?} of pin {} already names pin {o}", p.canonical)))
                    }
                    Some(_) => return Err(invalid(format!("alias {a:?} repeated on pin {}", p.canonical))),
                    None => {
                        owner.insert(k, &p.canonical);
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ComponentRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({})", self.canonical_name, self.category)?;
        if !self.name_aliases.is_empty() {
            writeln!(f, "aliases: {}", self.name_aliases.join(", "))?;
        }
        if !self.requires.is_empty() {
            writeln!(f, "requires: {}", self.requires.join(", "))?;
        }
        let width = self.pins.iter().map(|p| p.canonical.len()).max().unwrap_or(3).max(3);
        writeln!(f, "{:<width$}  {:<10}  {:<8}  aliases", "pin", "role", "critical")?;
        for p in &self.pins {
            let role = serde_json::to_value(p.role).ok();
            writeln!(
                f,
                "{:<width$}  {:<10}  {:<8}  {}",
                p.canonical,
                role.as_ref().and_then(|v| v.as_str()).unwrap_or("?"),
                if p.critical { "yes" } else { "no" },
                p.aliases.join(", ")
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read knowledge base: {0}")]
    Io(#[from] std::io::Error),
    #[error("knowledge base does not match the schema: {0}")]
    Schema(String),
    #[error("alias {alias:?} is claimed by both {first} and {second}")]
    DuplicateAlias { alias: String, first: String, second: String },
    #[error("record {record}: {message}")]
    InvalidRecord { record: String, message: String },
}

/// Lowercase, trim, and drop whitespace and hyphens.
pub fn normalize(name: &str) -> String {
    name.trim()
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '-')
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    records: IndexMap<String, ComponentRecord>,
    alias_index: HashMap<String, String>,
}

impl KnowledgeBase {
    pub fn from_records(list: Vec<ComponentRecord>) -> Result<Self, KbError> {
        let mut kb = KnowledgeBase::default();
        for rec in list {
            rec.check()?;
            let name = rec.canonical_name.clone();
            for alias in std::iter::once(&rec.canonical_name).chain(&rec.name_aliases) {
                let key = normalize(alias);
                match kb.alias_index.get(&key) {
                    Some(first) if first == &name => {}
                    Some(first) => {
                        return Err(KbError::DuplicateAlias {
                            alias: key,
                            first: first.clone(),
                            second: name,
                        })
                    }
                    None => {
                        kb.alias_index.insert(key, name.clone());
                    }
                }
            }
            kb.records.insert(name, rec);
        }
        Ok(kb)
    }

    pub fn from_json(text: &str) -> Result<Self, KbError> {
        let list: Vec<ComponentRecord> =
            serde_json::from_str(text).map_err(|e| KbError::Schema(e.to_string()))?;
        Self::from_records(list)
    }

    /// The knowledge base shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled knowledge base is valid")
    }

    pub fn bundled_json() -> &'static str {
        BUNDLED
    }

    pub fn lookup(&self, name: &str) -> Option<&ComponentRecord> {
        self.alias_index
            .get(&normalize(name))
            .and_then(|c| self.records.get(c))
    }

    pub fn records(&self) -> impl Iterator<Item = &ComponentRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    let text = std::fs::read_to_string(path)?;
    KnowledgeBase::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_loads() {
        let kb = KnowledgeBase::bundled();
        assert!(kb.len() >= 12);
        for name in [
            "LED", "resistor", "pushbutton", "hobby servo", "HC-SR04", "16x2 LCD", "piezo buzzer", "relay",
            "7-segment display", "Arduino Uno", "74HC08", "CDS cell",
        ] {
            assert!(kb.lookup(name).is_some(), "{name}");
        }
    }

    #[test]
    fn bundled_records_within_pin_bounds() {
        for r in KnowledgeBase::bundled().records() {
            assert!((2..=40).contains(&r.pins.len()), "{}", r.canonical_name);
            if r.category != Category::Passive {
                assert!(r.critical_pins().next().is_some(), "{}", r.canonical_name);
            }
        }
    }

    #[test]
    fn empty_kb() {
        let kb = KnowledgeBase::from_json("[]").unwrap();
        assert!(kb.is_empty());
        assert!(kb.lookup("led").is_none());
    }

    #[test]
    fn duplicate_alias() {
        let json = r#"[
          {"canonical_name": "arduino uno", "name_aliases": ["uno"], "category": "microcontroller",
           "pins": [{"canonical": "GND", "critical": true, "role": "ground"}, {"canonical": "5V", "critical": true, "role": "power"}]},
          {"canonical_name": "uno clone", "name_aliases": ["UNO"], "category": "microcontroller",
           "pins": [{"canonical": "GND", "critical": true, "role": "ground"}, {"canonical": "5V", "critical": true, "role": "power"}]}
        ]"#;
        match KnowledgeBase::from_json(json) {
            Err(KbError::DuplicateAlias { alias, .. }) => assert_eq!(alias, "uno"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_error() {
        assert!(matches!(KnowledgeBase::from_json("{}"), Err(KbError::Schema(_))));
        assert!(matches!(
            KnowledgeBase::from_json(r#"[{"canonical_name": "x", "category": "gizmo", "pins": []}]"#),
            Err(KbError::Schema(_))
        ));
    }

    #[test]
    fn pin_alias_collision_rejected() {
        let json = r#"[{"canonical_name": "x", "category": "output", "pins": [
            {"canonical": "A", "aliases": ["in"], "critical": true, "role": "signal"},
            {"canonical": "B", "aliases": ["IN"], "critical": true, "role": "signal"}]}]"#;
        assert!(matches!(KnowledgeBase::from_json(json), Err(KbError::InvalidRecord { .. })));
    }

    #[test]
    fn lookup_normalizes() {
        let kb = KnowledgeBase::bundled();
        assert_eq!(kb.lookup("Hobby Servo").unwrap().canonical_name, "hobby servo");
        assert_eq!(
            kb.lookup("HC-SR04").unwrap().canonical_name,
            kb.lookup("hcsr04").unwrap().canonical_name
        );
        assert!(kb.lookup("flux capacitor").is_none());
    }

    #[test]
    fn normalize_pins() {
        let kb = KnowledgeBase::bundled();
        let led = kb.lookup("led").unwrap();
        assert_eq!(led.normalize_pin("A"), Some("anode"));
        assert_eq!(led.normalize_pin("anode"), Some("anode"));
        assert_eq!(led.normalize_pin("gate"), None);
        let servo = kb.lookup("servo").unwrap();
        assert_eq!(servo.normalize_pin("VCC"), Some("power"));
    }

    #[test]
    fn normalize_pin_exhaustive_over_bundled() {
        for r in KnowledgeBase::bundled().records() {
            for p in &r.pins {
                assert_eq!(r.normalize_pin(&p.canonical), Some(p.canonical.as_str()));
                for a in &p.aliases {
                    assert_eq!(r.normalize_pin(a), Some(p.canonical.as_str()), "{} {a}", r.canonical_name);
                }
            }
        }
    }

    #[test]
    fn normalize_rules() {
        assert_eq!(normalize("  Hobby   Servo "), "hobbyservo");
        assert_eq!(normalize("HC-SR04"), "hcsr04");
        assert_eq!(normalize(&normalize("HC - SR 04")), normalize("HC - SR 04"));
    }

    #[test]
    fn record_renders() {
        let kb = KnowledgeBase::bundled();
        let text = kb.lookup("servo").unwrap().to_string();
        assert!(text.starts_with("hobby servo (output)"));
        assert!(text.contains("signal"));
    }
}
