use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Connection, PinRef};

/// A set of electrically joined pins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    /// 1-based ordinal, ascending by smallest member.
    pub id: usize,
    pub members: BTreeSet<PinRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Net {
    pub fn contains(&self, pin: &PinRef) -> bool {
        self.members.contains(pin)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Disjoint-set forest over interned pins, with path halving and union by
/// size.
#[derive(Debug, Default, Clone)]
pub struct PinUnionFind {
    index: HashMap<PinRef, usize>,
    pins: Vec<PinRef>,
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl PinUnionFind {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, pin: &PinRef) -> usize {
        if let Some(&i) = self.index.get(pin) {
            return i;
        }
        let i = self.pins.len();
        self.index.insert(pin.clone(), i);
        self.pins.push(pin.clone());
        self.parent.push(i);
        self.size.push(1);
        i
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub fn union(&mut self, a: &PinRef, b: &PinRef) {
        let (ia, ib) = (self.intern(a), self.intern(b));
        let (mut ra, mut rb) = (self.find(ia), self.find(ib));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }

    pub fn connected(&mut self, a: &PinRef, b: &PinRef) -> bool {
        match (self.index.get(a).copied(), self.index.get(b).copied()) {
            (Some(ia), Some(ib)) => self.find(ia) == self.find(ib),
            _ => false,
        }
    }

    /// Groups every interned pin by root.
    pub fn components(&mut self) -> Vec<BTreeSet<PinRef>> {
        let mut groups: HashMap<usize, BTreeSet<PinRef>> = HashMap::new();
        for i in 0..self.pins.len() {
            let r = self.find(i);
            groups.entry(r).or_default().insert(self.pins[i].clone());
        }
        groups.into_values().collect()
    }
}

/// Connected components of the pin graph, sorted by smallest member.
pub fn build_nets(connections: &[Connection]) -> Vec<Net> {
    let mut uf = PinUnionFind::new();
    for c in connections {
        uf.union(&c.a, &c.b);
    }
    let mut comps = uf.components();
    comps.sort_by(|x, y| x.first().cmp(&y.first()));
    comps
        .into_iter()
        .enumerate()
        .map(|(i, members)| Net {
            id: i + 1,
            members,
            label: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conn(a: &str, b: &str) -> Connection {
        Connection::new(PinRef::parse(a).unwrap(), PinRef::parse(b).unwrap()).unwrap()
    }

    #[test]
    fn empty_graph() {
        assert!(build_nets(&[]).is_empty());
    }

    #[test]
    fn pullup_button_is_one_three_pin_net() {
        let nets = build_nets(&[conn("UNO.D2", "R1.1"), conn("R1.1", "BTN1.1")]);
        assert_eq!(nets.len(), 1);
        let names: Vec<String> = nets[0].members.iter().map(ToString::to_string).collect();
        assert_eq!(names, ["BTN1.1", "R1.1", "UNO.D2"]);
        assert_eq!(nets[0].id, 1);
    }

    #[test]
    fn nets_sorted_by_smallest_member() {
        let nets = build_nets(&[conn("Z.1", "Y.1"), conn("B.1", "C.1"), conn("A.2", "Q.1")]);
        let firsts: Vec<String> = nets.iter().map(|n| n.members.first().unwrap().to_string()).collect();
        assert_eq!(firsts, ["A.2", "B.1", "Y.1"]);
        assert_eq!(nets.iter().map(|n| n.id).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn connected_query() {
        let mut uf = PinUnionFind::new();
        let p = |s| PinRef::parse(s).unwrap();
        uf.union(&p("A.1"), &p("B.1"));
        uf.union(&p("B.1"), &p("C.1"));
        uf.union(&p("D.1"), &p("E.1"));
        assert!(uf.connected(&p("A.1"), &p("C.1")));
        assert!(!uf.connected(&p("A.1"), &p("D.1")));
        assert!(!uf.connected(&p("A.1"), &p("X.1")));
    }
}
