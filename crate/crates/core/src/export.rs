//! Interchange renderings of a device: a flat netlist and a DOT graph.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::devicespec::{validate, DeviceSpec, Net, PartRef, PinRef, StructuralFinding};
use crate::partsdb::{KnowledgeBase, PinRole};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("spec has {} structural finding(s)", .0.len())]
    InvalidSpec(Vec<StructuralFinding>),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Flat,
    Graph,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(Format::Flat),
            "graph" | "dot" => Ok(Format::Graph),
            other => Err(format!("unknown export format {other:?} (expected flat or graph)")),
        }
    }
}

fn checked(spec: &DeviceSpec) -> Result<(), ExportError> {
    let v = validate(spec);
    if v.is_clean() {
        Ok(())
    } else {
        Err(ExportError::InvalidSpec(v.findings))
    }
}

/// `VCC` or `GND` for nets holding a supply pin of that role.
fn supply_label(spec: &DeviceSpec, kb: &KnowledgeBase, net: &Net) -> Option<String> {
    let (mut vcc, mut gnd) = (false, false);
    for m in &net.members {
        let Some(rec) = spec.bom_item(&m.part).and_then(|b| kb.lookup(&b.part_type)) else { continue };
        if !rec.is_supply_source() {
            continue;
        }
        match rec.resolve_pin(&m.pin).map(|p| p.role) {
            Some(PinRole::Power) => vcc = true,
            Some(PinRole::Ground) => gnd = true,
            _ => {}
        }
    }
    match (vcc, gnd) {
        (true, false) => Some("VCC".into()),
        (false, true) => Some("GND".into()),
        _ => None,
    }
}

/// Nets of `spec`, labelled from the knowledge base when one is given.
pub fn labelled_nets(spec: &DeviceSpec, kb: Option<&KnowledgeBase>) -> Vec<Net> {
    let mut nets = spec.nets();
    if let Some(kb) = kb {
        for n in &mut nets {
            n.label = supply_label(spec, kb, n);
        }
    }
    nets
}

/// One `NET <n>: <PART.PIN> ...` line per net, members sorted.
///
/// Labelled nets are written `NET <n> (<label>): ...`.
pub fn to_flat_netlist(spec: &DeviceSpec, kb: Option<&KnowledgeBase>) -> Result<String, ExportError> {
    checked(spec)?;
    let nets = labelled_nets(spec, kb);
    let mut out = String::new();
    let title = spec.description.lines().next().unwrap_or("").trim();
    let _ = writeln!(out, "# netlist: {} net(s){}", nets.len(), if title.is_empty() { String::new() } else { format!(", {title}") });
    for n in &nets {
        let members: Vec<String> = n.members.iter().map(ToString::to_string).collect();
        match &n.label {
            Some(l) => {
                let _ = writeln!(out, "NET {} ({l}): {}", n.id, members.join(" "));
            }
            None => {
                let _ = writeln!(out, "NET {}: {}", n.id, members.join(" "));
            }
        }
    }
    Ok(out)
}

/// Reads a flat netlist back into its nets; comments and blank lines are skipped.
pub fn parse_flat_netlist(text: &str) -> Result<Vec<BTreeSet<PinRef>>, ExportError> {
    let mut nets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| ExportError::Syntax {
            line: i + 1,
            message: message.to_string(),
        };
        let rest = line.strip_prefix("NET ").ok_or_else(|| err("expected NET"))?;
        let (head, body) = rest.split_once(':').ok_or_else(|| err("expected ':'"))?;
        let id = head.split_whitespace().next().unwrap_or("");
        id.parse::<usize>().map_err(|_| err("bad net number"))?;
        let members = body
            .split_whitespace()
            .map(|m| PinRef::parse(m).map_err(|e| err(&e.to_string())))
            .collect::<Result<BTreeSet<_>, _>>()?;
        if members.is_empty() {
            return Err(err("empty net"));
        }
        nets.push(members);
    }
    Ok(nets)
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

/// Undirected DOT graph: a node per BOM part, an edge per connection.
///
/// Edges carry a `pins` attribute with both endpoints so a viewer can map an
/// ERC locus to its edge.
pub fn to_graph_doc(spec: &DeviceSpec) -> Result<String, ExportError> {
    checked(spec)?;
    let mut out = String::from("graph device {\n");
    let mut seen: BTreeSet<&PartRef> = BTreeSet::new();
    for b in &spec.bom {
        if !seen.insert(&b.part) {
            continue;
        }
        let _ = writeln!(
            out,
            "  {} [label={}];",
            quote(b.part.as_str()),
            quote(&format!("{}\n{}", b.part, b.part_type))
        );
    }
    for c in &spec.connections {
        let [a, b] = c.endpoints();
        let _ = writeln!(
            out,
            "  {} -- {} [label={}, pins={}];",
            quote(a.part.as_str()),
            quote(b.part.as_str()),
            quote(&format!("{}-{}", a.pin, b.pin)),
            quote(&format!("{a} {b}"))
        );
    }
    out.push_str("}\n");
    Ok(out)
}

pub fn export(spec: &DeviceSpec, format: Format, kb: Option<&KnowledgeBase>) -> Result<String, ExportError> {
    match format {
        Format::Flat => to_flat_netlist(spec, kb),
        Format::Graph => to_graph_doc(spec),
    }
}
