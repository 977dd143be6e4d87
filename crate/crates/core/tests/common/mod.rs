//! Random generators and brute-force oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::IndexedRandom;
use rand::Rng;
use wirespec::devicespec::{BomItem, CodeArtifact, Connection, DeviceSpec, PartRef, PinEntry, PinRef, Provenance};
use wirespec::partsdb::ComponentRecord;

const PIN_NAMES: &[&str] = &[
    "1", "2", "3", "GND", "VCC", "5V", "3.3V", "D2", "D13", "A0", "anode", "cathode", "SDA", "SCL", "IN-", "IN+",
    "OUT1", "common", "V0", "RX/TX",
];
const TEXT: &[&str] = &["", "plain", "with \"quotes\"", "line\nbreak", "tab\tand \\ slash", "ünïcödé µF Ω", "{braces} [x]"];

fn text<R: Rng>(rng: &mut R) -> String {
    TEXT.choose(rng).unwrap().to_string()
}

fn maybe_text<R: Rng>(rng: &mut R) -> Option<String> {
    rng.random_bool(0.3).then(|| text(rng))
}

fn part_ref<R: Rng>(rng: &mut R, i: usize) -> PartRef {
    let prefix = ["R", "LED", "U", "BTN", "C", "J", "x_"].choose(rng).unwrap();
    PartRef::new(format!("{prefix}{i}")).unwrap()
}

/// A structurally valid spec with every optional field exercised at random.
pub fn random_spec<R: Rng>(rng: &mut R) -> DeviceSpec {
    let mut spec = DeviceSpec::new(text(rng));
    let n_parts = rng.random_range(0..8);
    let mut all_pins = Vec::new();
    for i in 0..n_parts {
        let part = part_ref(rng, i);
        let mut item = BomItem::new(part.clone(), ["resistor", "LED", "Arduino Uno", "mystery-part"].choose(rng).unwrap().to_string());
        item.value = maybe_text(rng);
        item.note = maybe_text(rng);
        spec.bom.push(item);
        spec.pinouts.declare(part.clone());
        let k = rng.random_range(0..5);
        for name in PIN_NAMES.choose_multiple(rng, k) {
            let mut e = PinEntry::new(*name);
            e.note = maybe_text(rng);
            spec.pinouts.push(part.clone(), e);
            all_pins.push(PinRef::new(part.clone(), *name).unwrap());
        }
    }
    if all_pins.len() >= 2 {
        for _ in 0..rng.random_range(0..12) {
            let a = all_pins.choose(rng).unwrap().clone();
            let b = all_pins.choose(rng).unwrap().clone();
            if let Ok(mut c) = Connection::new(a, b) {
                c.note = maybe_text(rng);
                spec.connections.push(c);
            }
        }
    }
    if rng.random_bool(0.7) {
        let mut code = CodeArtifact::new(format!("void setup() {{}}\n// {}\nvoid loop() {{}}\n", text(rng)));
        if rng.random_bool(0.2) {
            code.language_tag = "cpp".into();
        }
        code.note = maybe_text(rng);
        spec.code = Some(code);
    }
    spec.provenance = Provenance {
        model_id: rng.random_bool(0.5).then(|| "some-model".to_string()),
        prompt_digest: rng.random_bool(0.5).then(|| format!("{:064x}", rng.random::<u128>())),
        reflection_iterations: rng.random_range(0..5),
        created_at: rng.random_bool(0.5).then(|| "2024-05-01T12:00:00Z".to_string()),
    };
    spec
}

/// `n_edges` random connections over `n_pins` pins spread across a few parts.
pub fn random_edges<R: Rng>(rng: &mut R, n_pins: usize, n_edges: usize) -> Vec<Connection> {
    let pins: Vec<PinRef> = (0..n_pins.max(2))
        .map(|i| PinRef::new(PartRef::new(format!("P{}", i % 37)).unwrap(), format!("{}", i / 37)).unwrap())
        .collect();
    let mut out = Vec::with_capacity(n_edges);
    while out.len() < n_edges {
        let a = pins.choose(rng).unwrap();
        let b = pins.choose(rng).unwrap();
        if let Ok(c) = Connection::new(a.clone(), b.clone()) {
            out.push(c);
        }
    }
    out
}

/// Connected components by breadth-first search over an adjacency list,
/// ordered by smallest member.
pub fn bfs_components(conns: &[Connection]) -> Vec<BTreeSet<PinRef>> {
    let mut adj: BTreeMap<&PinRef, Vec<&PinRef>> = BTreeMap::new();
    for c in conns {
        adj.entry(&c.a).or_default().push(&c.b);
        adj.entry(&c.b).or_default().push(&c.a);
    }
    let mut seen: BTreeSet<&PinRef> = BTreeSet::new();
    let mut comps = Vec::new();
    for &start in adj.keys() {
        if seen.contains(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut q = VecDeque::from([start]);
        seen.insert(start);
        while let Some(p) = q.pop_front() {
            comp.insert(p.clone());
            for &n in &adj[p] {
                if seen.insert(n) {
                    q.push_back(n);
                }
            }
        }
        comps.push(comp);
    }
    // keys are visited in order, so each component starts at its minimum
    comps
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase().chars().filter(|c| !c.is_whitespace() && *c != '-').collect()
}

/// Hand count of (strict, permissive) for a generated pin list.
pub fn count_score(rec: &ComponentRecord, generated: &[String]) -> (bool, bool) {
    let mut hit = vec![false; rec.pins.len()];
    let mut unknown = 0;
    for g in generated {
        let key = fold(g);
        let mut found = false;
        for (i, p) in rec.pins.iter().enumerate() {
            if fold(&p.canonical) == key || p.aliases.iter().any(|a| fold(a) == key) {
                hit[i] = true;
                found = true;
                break;
            }
        }
        if !found {
            unknown += 1;
        }
    }
    let critical_ok = rec.pins.iter().zip(&hit).all(|(p, h)| !p.critical || *h);
    let all_ok = hit.iter().all(|h| *h);
    (all_ok && unknown == 0, critical_ok)
}

/// A generated pin list for `rec`: a random subset of pins, written with
/// canonical names or aliases in scrambled case and spacing, plus the odd
/// made-up name.
pub fn random_pinout<R: Rng>(rng: &mut R, rec: &ComponentRecord) -> Vec<String> {
    let mut out = Vec::new();
    let keep = rng.random_range(0.5..1.0);
    for p in &rec.pins {
        if !rng.random_bool(keep) {
            continue;
        }
        let mut names = vec![p.canonical.clone()];
        names.extend(p.aliases.iter().cloned());
        let mut name = names.choose(rng).unwrap().clone();
        if rng.random_bool(0.3) {
            name = name.to_uppercase();
        }
        if rng.random_bool(0.2) {
            name = format!(" {name} ");
        }
        out.push(name.clone());
        if rng.random_bool(0.1) {
            out.push(name);
        }
    }
    if rng.random_bool(0.15) {
        out.push(["NC", "EXTRA", "VBAT"].choose(rng).unwrap().to_string());
    }
    use rand::seq::SliceRandom;
    out.shuffle(rng);
    out
}
