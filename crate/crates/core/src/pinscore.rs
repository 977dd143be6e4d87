//! Pinout scoring against knowledge-base references.
//!
//! A generated pinout is *strict*-correct when it names every pin of the
//! component and nothing unknown, and *permissive*-correct when it names at
//! least every function-critical pin. Names are resolved through
//! [`ComponentRecord::normalize_pin`]; extra names that resolve to a known
//! pin are duplicates and ignored, unknown names break strict only.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partsdb::{ComponentRecord, KnowledgeBase};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("cannot aggregate an empty score list")]
    EmptyInput,
    #[error("component {0:?} is not in the knowledge base")]
    UnknownComponent(String),
    #[error("override for {component} claims strict without permissive")]
    InconsistentOverride { component: String },
    #[error("override names {0:?}, which was not scored")]
    UnknownOverride(String),
}

/// Expert verdict replacing the automated one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualOverride {
    pub component: String,
    pub strict: bool,
    pub permissive: bool,
    #[serde(default)]
    pub reviewer: Option<String>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinoutScore {
    pub component: String,
    pub strict: bool,
    pub permissive: bool,
    pub missing_critical: Vec<String>,
    pub missing_noncritical: Vec<String>,
    pub unknown_generated: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_override: Option<ManualOverride>,
}

impl PinoutScore {
    /// Verdicts after applying any manual override.
    pub fn effective(&self) -> (bool, bool) {
        match &self.manual_override {
            Some(o) => (o.strict, o.permissive),
            None => (self.strict, self.permissive),
        }
    }

    pub fn apply_override(&mut self, o: ManualOverride) -> Result<(), ScoreError> {
        if o.strict && !o.permissive {
            return Err(ScoreError::InconsistentOverride { component: o.component });
        }
        self.manual_override = Some(o);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreAggregate {
    pub n: usize,
    pub strict_pass: usize,
    pub permissive_pass: usize,
    pub strict_rate: f64,
    pub permissive_rate: f64,
}

pub fn score_pinout(record: &ComponentRecord, generated: &[String]) -> PinoutScore {
    let mut named: HashSet<&str> = HashSet::new();
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    for g in generated {
        match record.normalize_pin(g) {
            Some(c) => {
                named.insert(c);
            }
            None => {
                unknown.insert(g.trim().to_string());
            }
        }
    }
    let (mut missing_critical, mut missing_noncritical) = (Vec::new(), Vec::new());
    for p in &record.pins {
        if !named.contains(p.canonical.as_str()) {
            if p.critical {
                missing_critical.push(p.canonical.clone());
            } else {
                missing_noncritical.push(p.canonical.clone());
            }
        }
    }
    let permissive = missing_critical.is_empty();
    let strict = permissive && missing_noncritical.is_empty() && unknown.is_empty();
    PinoutScore {
        component: record.canonical_name.clone(),
        strict,
        permissive,
        missing_critical,
        missing_noncritical,
        unknown_generated: unknown.into_iter().collect(),
        manual_override: None,
    }
}

pub fn aggregate(scores: &[PinoutScore]) -> Result<ScoreAggregate, ScoreError> {
    if scores.is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    let n = scores.len();
    let (mut s, mut p) = (0, 0);
    for sc in scores {
        let (strict, permissive) = sc.effective();
        s += usize::from(strict);
        p += usize::from(permissive);
    }
    Ok(ScoreAggregate {
        n,
        strict_pass: s,
        permissive_pass: p,
        strict_rate: s as f64 / n as f64,
        permissive_rate: p as f64 / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scores: Vec<PinoutScore>,
    pub aggregate: ScoreAggregate,
}

/// Scores a map of component name to generated pin names, applying overrides.
pub fn score_all(
    kb: &KnowledgeBase,
    generated: &indexmap::IndexMap<String, Vec<String>>,
    overrides: &[ManualOverride],
) -> Result<ScoreReport, ScoreError> {
    let mut scores = Vec::with_capacity(generated.len());
    for (name, pins) in generated {
        let rec = kb
            .lookup(name)
            .ok_or_else(|| ScoreError::UnknownComponent(name.clone()))?;
        scores.push(score_pinout(rec, pins));
    }
    for o in overrides {
        let canonical = kb.lookup(&o.component).map(|r| r.canonical_name.clone());
        let target = scores
            .iter_mut()
            .find(|s| Some(&s.component) == canonical.as_ref())
            .ok_or_else(|| ScoreError::UnknownOverride(o.component.clone()))?;
        log::info!(
            "manual override for {}: strict {} -> {}, permissive {} -> {}",
            target.component,
            target.strict,
            o.strict,
            target.permissive,
            o.permissive
        );
        target.apply_override(o.clone())?;
    }
    let aggregate = aggregate(&scores)?;
    Ok(ScoreReport { scores, aggregate })
}
