use std::collections::{BTreeSet, HashMap, VecDeque};

use super::codescan::scan_pin_calls;
use super::*;
use crate::devicespec::StructuralFinding;
use crate::partsdb::{Category, NEEDS_PULLUP, NEEDS_SERIES_RESISTOR};
use crate::specparser::is_range_endpoint;

pub(super) fn run(rule: &str, ctx: &Ctx) -> Vec<Finding> {
    match rule {
        E_POWER => power(ctx),
        E_RANGE => range(ctx),
        E_DANGLE => dangle(ctx),
        E_SHORT => short(ctx),
        E_LED_RESISTOR => led_resistor(ctx),
        W_PULLUP => pullup(ctx),
        W_FLOAT_INPUT => float_input(ctx),
        E_DUP_REF => dup_ref(ctx),
        W_CODE_PIN => code_pin(ctx),
        _ => Vec::new(),
    }
}

/// True when net `n` holds a pin of a supply source with the given role.
fn net_has_supply(ctx: &Ctx, n: usize, role: PinRole) -> bool {
    ctx.nets[n]
        .members
        .iter()
        .any(|m| ctx.is_supply(&m.part) && ctx.role(m) == Some(role))
}

fn power(ctx: &Ctx) -> Vec<Finding> {
    let mut out = Vec::new();
    for (part, rec) in &ctx.records {
        if rec.is_supply_source() || rec.category == Category::Passive {
            continue;
        }
        if !rec.pins.iter().any(|p| p.role == PinRole::Power) {
            continue;
        }
        for kb_pin in rec.critical_pins() {
            let (role, what) = match kb_pin.role {
                PinRole::Power => (PinRole::Power, "power"),
                PinRole::Ground => (PinRole::Ground, "ground"),
                _ => continue,
            };
            let pins = ctx.pins_for(part, &kb_pin.canonical);
            let ok = pins
                .iter()
                .filter_map(|p| ctx.net(p))
                .any(|n| net_has_supply(ctx, n, role));
            if !ok {
                let locus = match pins.into_iter().next() {
                    Some(p) => Locus::Pin(p),
                    None => Locus::Part(part.clone()),
                };
                out.push(Finding::new(
                    E_POWER,
                    locus,
                    format!(
                        "{} {part} has its {what} pin {} not connected to a supply {what} pin",
                        rec.canonical_name, kb_pin.canonical
                    ),
                ));
            }
        }
    }
    out
}

fn range(ctx: &Ctx) -> Vec<Finding> {
    let mut out = Vec::new();
    for (i, c) in ctx.spec.connections.iter().enumerate() {
        for ep in c.endpoints() {
            if is_range_endpoint(&ep.to_string()) {
                out.push(Finding::new(
                    E_RANGE,
                    Locus::Pin(ep.clone()),
                    format!("connection {i} endpoint {ep} is a pin range, not a single pin"),
                ));
            }
        }
    }
    out
}

fn dangle(ctx: &Ctx) -> Vec<Finding> {
    let mut out: Vec<Finding> = ctx
        .structural
        .iter()
        .map(|f| {
            let ep = f.endpoint().clone();
            let msg = match f {
                StructuralFinding::UndeclaredPart { connection, .. } => {
                    format!("connection {connection} uses undeclared part {}", ep.part)
                }
                StructuralFinding::MissingPin { connection, .. } => {
                    format!("connection {connection} uses pin {ep}, which is not in the pinout")
                }
            };
            Finding::new(E_DANGLE, Locus::Pin(ep), msg)
        })
        .collect();
    for part in ctx.spec.pinouts.parts() {
        if !ctx.spec.has_part(part) {
            out.push(Finding::new(
                E_DANGLE,
                Locus::Part(part.clone()),
                format!("pinout lists part {part}, which is not in the bill of materials"),
            ));
        }
    }
    out
}

fn short(ctx: &Ctx) -> Vec<Finding> {
    let mut out = Vec::new();
    for net in &ctx.nets {
        let supply = |role| {
            net.members
                .iter()
                .find(|m| ctx.is_supply(&m.part) && ctx.role(m) == Some(role))
        };
        if let (Some(p), Some(g)) = (supply(PinRole::Power), supply(PinRole::Ground)) {
            out.push(Finding::new(
                E_SHORT,
                Locus::Pin(p.clone()),
                format!("net {} joins supply pin {p} directly to ground pin {g}", net.id),
            ));
        }
    }
    out
}

/// Nets reachable from `start` without passing through a resistance. Only
/// input-category parts (switches) conduct between their pins; `skip` is the
/// part being checked.
fn reach(ctx: &Ctx, start: usize, skip: &PartRef) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for m in &ctx.nets[n].members {
            if &m.part == skip {
                continue;
            }
            let Some(rec) = ctx.record(&m.part) else { continue };
            if rec.category != Category::Input || rec.is_resistive() {
                continue;
            }
            for other in ctx.spec_pins(&m.part) {
                if let Some(k) = ctx.net(&other) {
                    if seen.insert(k) {
                        queue.push_back(k);
                    }
                }
            }
        }
    }
    seen
}

fn is_source_net(ctx: &Ctx, n: usize) -> bool {
    ctx.nets[n].members.iter().any(|m| {
        let Some(rec) = ctx.record(&m.part) else { return false };
        match ctx.role(m) {
            Some(PinRole::Power) => rec.is_supply_source(),
            Some(r) if r.is_signal_like() => rec.category == Category::Microcontroller,
            _ => false,
        }
    })
}

fn led_resistor(ctx: &Ctx) -> Vec<Finding> {
    let mut out = Vec::new();
    for (part, rec) in &ctx.records {
        if !rec.requires(NEEDS_SERIES_RESISTOR) {
            continue;
        }
        let pins = ctx.spec_pins(part);
        let grounded = pins
            .iter()
            .filter(|p| ctx.role(p) == Some(PinRole::Ground))
            .filter_map(|p| ctx.net(p))
            .any(|n| reach(ctx, n, part).into_iter().any(|k| net_has_supply(ctx, k, PinRole::Ground)));
        if !grounded {
            continue;
        }
        for p in pins.iter().filter(|p| ctx.role(p).is_some_and(PinRole::is_signal_like)) {
            let Some(n) = ctx.net(p) else { continue };
            if reach(ctx, n, part).into_iter().any(|k| is_source_net(ctx, k)) {
                out.push(Finding::new(
                    E_LED_RESISTOR,
                    Locus::Pin(p.clone()),
                    format!("{} {part} is driven at {p} with no series resistor", rec.canonical_name),
                ));
            }
        }
    }
    out
}

fn pullup(ctx: &Ctx) -> Vec<Finding> {
    let pullup_pins: Vec<Vec<String>> = ctx
        .spec
        .code
        .as_ref()
        .map(|c| {
            scan_pin_calls(&c.source)
                .into_iter()
                .filter(|c| c.function == "pinMode" && c.mode.as_deref() == Some("INPUT_PULLUP"))
                .map(|c| c.candidate_pins())
                .collect()
        })
        .unwrap_or_default();
    let mut out = Vec::new();
    for (part, rec) in &ctx.records {
        if !rec.requires(NEEDS_PULLUP) {
            continue;
        }
        let nets: BTreeSet<usize> = ctx
            .spec_pins(part)
            .iter()
            .filter(|p| ctx.role(p).is_some_and(PinRole::is_signal_like))
            .filter_map(|p| ctx.net(p))
            .collect();
        let satisfied = nets.iter().any(|&n| {
            ctx.nets[n].members.iter().any(|m| {
                if &m.part == part {
                    return false;
                }
                let Some(r) = ctx.record(&m.part) else { return false };
                if r.canonical_name == "resistor" {
                    return true;
                }
                r.category == Category::Microcontroller
                    && pullup_pins.iter().any(|cands| {
                        let on_pin = r.normalize_pin(&m.pin);
                        cands.iter().any(|c| r.normalize_pin(c).is_some_and(|x| Some(x) == on_pin))
                    })
            })
        });
        if !satisfied {
            out.push(Finding::new(
                W_PULLUP,
                Locus::Part(part.clone()),
                format!("{} {part} needs a pull-up resistor on its signal net", rec.canonical_name),
            ));
        }
    }
    out
}

fn float_input(ctx: &Ctx) -> Vec<Finding> {
    let mut out = Vec::new();
    for (part, rec) in &ctx.records {
        if rec.is_supply_source() {
            continue;
        }
        for kb_pin in rec.critical_pins() {
            let pins = ctx.pins_for(part, &kb_pin.canonical);
            if pins.iter().any(|p| ctx.net(p).is_some()) {
                continue;
            }
            let locus = match pins.into_iter().next() {
                Some(p) => p,
                None => match PinRef::new(part.clone(), kb_pin.canonical.clone()) {
                    Ok(p) => p,
                    Err(_) => continue,
                },
            };
            out.push(Finding::new(
                W_FLOAT_INPUT,
                Locus::Pin(locus),
                format!("critical pin {} of {} {part} is not connected", kb_pin.canonical, rec.canonical_name),
            ));
        }
    }
    out
}

fn dup_ref(ctx: &Ctx) -> Vec<Finding> {
    let mut count: HashMap<&PartRef, usize> = HashMap::new();
    for b in &ctx.spec.bom {
        *count.entry(&b.part).or_default() += 1;
    }
    let mut out: Vec<Finding> = count
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|(p, n)| {
            Finding::new(
                E_DUP_REF,
                Locus::Part(p.clone()),
                format!("reference {p} is used by {n} bill-of-materials entries"),
            )
        })
        .collect();
    out.sort_by(|a, b| a.locus.cmp(&b.locus));
    out
}

fn code_pin(ctx: &Ctx) -> Vec<Finding> {
    let Some(code) = &ctx.spec.code else { return Vec::new() };
    let mcus: Vec<(&PartRef, &ComponentRecord)> = ctx
        .records
        .iter()
        .filter(|(_, r)| r.category == Category::Microcontroller)
        .map(|(p, r)| (p, *r))
        .collect();
    if mcus.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for call in scan_pin_calls(&code.source) {
        if !seen.insert((call.line, call.written.clone())) {
            continue;
        }
        let cands = call.candidate_pins();
        let wired = mcus.iter().any(|(part, rec)| {
            let targets: BTreeSet<&str> = cands.iter().filter_map(|c| rec.normalize_pin(c)).collect();
            ctx.spec_pins(part).iter().any(|p| {
                ctx.net(p).is_some()
                    && (cands.iter().any(|c| c == &p.pin)
                        || rec.normalize_pin(&p.pin).is_some_and(|x| targets.contains(x)))
            })
        });
        if !wired {
            out.push(Finding::new(
                W_CODE_PIN,
                Locus::CodeLine(call.line),
                format!(
                    "line {}: {}({}) uses a microcontroller pin that is in no net",
                    call.line, call.function, call.written
                ),
            ));
        }
    }
    out
}
