// SPDX-License-Identifier: Apache-2.0

//! Simple Operator Graph: single-bit registers plus NOT, AND2, OR2, XOR2 and
//! MUX2 gates.
//!
//! Node identities follow the word-level names: input/output port bits and
//! register bits are `net[i]`, the shared constants are `CONST0`/`CONST1`,
//! gates get `g<id>`. Port and register identities survive optimization and
//! are the key for matching paths across flows.

mod lower;
mod sim;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lower::lower;
pub use sim::{check_equivalence, simulate_sog, Equivalence, SogSimulator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SogKind {
    Pi,
    Po,
    Const0,
    Const1,
    Not,
    And2,
    Or2,
    Xor2,
    Mux2,
    Dff,
}

impl SogKind {
    pub const ALL: [SogKind; 10] = [
        SogKind::Pi,
        SogKind::Po,
        SogKind::Const0,
        SogKind::Const1,
        SogKind::Not,
        SogKind::And2,
        SogKind::Or2,
        SogKind::Xor2,
        SogKind::Mux2,
        SogKind::Dff,
    ];

    /// The five logic gate kinds, in feature order.
    pub const GATES: [SogKind; 5] = [
        SogKind::Not,
        SogKind::And2,
        SogKind::Or2,
        SogKind::Xor2,
        SogKind::Mux2,
    ];

    pub fn arity(self) -> usize {
        match self {
            SogKind::Pi | SogKind::Const0 | SogKind::Const1 => 0,
            SogKind::Po | SogKind::Not | SogKind::Dff => 1,
            SogKind::And2 | SogKind::Or2 | SogKind::Xor2 => 2,
            SogKind::Mux2 => 3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_gate(self) -> bool {
        Self::GATES.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SogKind::Pi => "PI",
            SogKind::Po => "PO",
            SogKind::Const0 => "CONST0",
            SogKind::Const1 => "CONST1",
            SogKind::Not => "NOT",
            SogKind::And2 => "AND2",
            SogKind::Or2 => "OR2",
            SogKind::Xor2 => "XOR2",
            SogKind::Mux2 => "MUX2",
            SogKind::Dff => "DFF",
        }
    }
}

impl fmt::Display for SogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SogKind {
    type Err = SogError;

    fn from_str(s: &str) -> Result<Self, SogError> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SogError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SogError {
    #[error("unknown SOG node kind `{0}`")]
    UnknownKind(String),
    #[error("node {id}: {detail}")]
    Malformed { id: usize, detail: String },
    #[error("combinational cycle through node {0}")]
    Cycle(usize),
    #[error("malformed SOG document: {0}")]
    Document(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SogNode {
    pub kind: SogKind,
    pub fanin: Vec<u32>,
    pub identity: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SogGraph {
    pub name: String,
    pub nodes: Vec<SogNode>,
    /// Launch-point identities (PI, DFF, constants) to node id.
    pub name_map: BTreeMap<String, u32>,
    /// PI ids in input-port declaration order, LSB first.
    pub inputs: Vec<u32>,
    /// PO ids in output-port declaration order, LSB first.
    pub outputs: Vec<u32>,
    pub registers: Vec<u32>,
    pub clock_period_ns: f64,
}

impl SogGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kind(&self, id: u32) -> SogKind {
        self.nodes[id as usize].kind
    }

    pub fn count(&self, kind: SogKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Fanout lists, each sorted by consumer id.
    pub fn fanouts(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            for &f in &n.fanin {
                out[f as usize].push(id as u32);
            }
        }
        out
    }

    /// Topological order of all nodes treating DFF outputs as sources
    /// (DFF data arcs are ignored). Ties resolve to the lowest id.
    pub fn topo_order(&self) -> Result<Vec<u32>, SogError> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut succ: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (id, node) in self.nodes.iter().enumerate() {
            if node.kind == SogKind::Dff {
                continue;
            }
            for &f in &node.fanin {
                indeg[id] += 1;
                succ[f as usize].push(id as u32);
            }
        }
        let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<u32>> = (0..n as u32)
            .filter(|&i| indeg[i as usize] == 0)
            .map(std::cmp::Reverse)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(std::cmp::Reverse(id)) = ready.pop() {
            order.push(id);
            for &s in &succ[id as usize] {
                indeg[s as usize] -= 1;
                if indeg[s as usize] == 0 {
                    ready.push(std::cmp::Reverse(s));
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(SogError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Check kind arities, fanin ranges, acyclicity and bookkeeping lists.
    pub fn validate(&self) -> Result<(), SogError> {
        let n = self.nodes.len();
        for (id, node) in self.nodes.iter().enumerate() {
            if node.fanin.len() != node.kind.arity() {
                return Err(SogError::Malformed {
                    id,
                    detail: format!("{} with {} fanins", node.kind, node.fanin.len()),
                });
            }
            if let Some(&f) = node.fanin.iter().find(|&&f| f as usize >= n) {
                return Err(SogError::Malformed {
                    id,
                    detail: format!("fanin {f} out of range"),
                });
            }
            if node.fanin.iter().any(|&f| self.kind(f) == SogKind::Po) {
                return Err(SogError::Malformed {
                    id,
                    detail: "reads a PO".into(),
                });
            }
        }
        let listed = |ids: &[u32], kind: SogKind| {
            let mut expect: Vec<u32> = (0..n as u32).filter(|&i| self.kind(i) == kind).collect();
            let mut got = ids.to_vec();
            expect.sort_unstable();
            got.sort_unstable();
            got == expect
        };
        if !listed(&self.inputs, SogKind::Pi)
            || !listed(&self.outputs, SogKind::Po)
            || !listed(&self.registers, SogKind::Dff)
        {
            return Err(SogError::Malformed {
                id: 0,
                detail: "port or register lists disagree with node kinds".into(),
            });
        }
        self.topo_order().map(|_| ())
    }

    /// Drop combinational nodes outside the fan-in cones of POs and DFF data
    /// pins. PIs, POs and DFFs are always kept; relative order is preserved.
    pub fn prune(&self) -> SogGraph {
        let n = self.nodes.len();
        let mut live = vec![false; n];
        let mut stack: Vec<u32> = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if matches!(node.kind, SogKind::Pi | SogKind::Po | SogKind::Dff) {
                live[id] = true;
                stack.push(id as u32);
            }
        }
        while let Some(id) = stack.pop() {
            for &f in &self.nodes[id as usize].fanin {
                if !live[f as usize] {
                    live[f as usize] = true;
                    stack.push(f);
                }
            }
        }
        self.retain(&live)
    }

    /// Keep only nodes flagged in `keep`, renumbering densely.
    pub(crate) fn retain(&self, keep: &[bool]) -> SogGraph {
        let mut remap = vec![u32::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if keep[id] {
                remap[id] = nodes.len() as u32;
                nodes.push(node.clone());
            }
        }
        for node in &mut nodes {
            for f in &mut node.fanin {
                *f = remap[*f as usize];
            }
        }
        let map = |ids: &[u32]| -> Vec<u32> {
            ids.iter()
                .filter(|&&i| keep[i as usize])
                .map(|&i| remap[i as usize])
                .collect()
        };
        SogGraph {
            name: self.name.clone(),
            name_map: self
                .name_map
                .iter()
                .filter(|(_, &i)| keep[i as usize])
                .map(|(k, &i)| (k.clone(), remap[i as usize]))
                .collect(),
            inputs: map(&self.inputs),
            outputs: map(&self.outputs),
            registers: map(&self.registers),
            clock_period_ns: self.clock_period_ns,
            nodes,
        }
    }

    /// Logic level per node: PI, constants and DFF outputs are level 0, each
    /// gate adds one, POs take the level of their driver.
    pub fn levels(&self) -> Vec<u32> {
        let order = self.topo_order().expect("SOG is acyclic");
        let mut level = vec![0u32; self.nodes.len()];
        for id in order {
            let node = &self.nodes[id as usize];
            let base = || {
                node.fanin
                    .iter()
                    .map(|&f| level[f as usize])
                    .max()
                    .unwrap_or(0)
            };
            level[id as usize] = match node.kind {
                k if k.is_gate() => base() + 1,
                SogKind::Po => base(),
                _ => 0,
            };
        }
        level
    }

    pub fn to_doc(&self) -> SogDoc {
        SogDoc {
            name: self.name.clone(),
            clock_period_ns: self.clock_period_ns,
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(id, n)| SogNodeDoc {
                    id: id as u32,
                    kind: n.kind,
                    fanin: n.fanin.clone(),
                    identity: n.identity.clone(),
                    p: None,
                    alpha: None,
                })
                .collect(),
        }
    }

    /// Rebuild a graph from its document. Port and register order is node
    /// order.
    pub fn from_doc(doc: &SogDoc) -> Result<SogGraph, SogError> {
        let mut name_map = BTreeMap::new();
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for (i, nd) in doc.nodes.iter().enumerate() {
            if nd.id as usize != i {
                return Err(SogError::Document(format!("node {i} has id {}", nd.id)));
            }
            if matches!(
                nd.kind,
                SogKind::Pi | SogKind::Dff | SogKind::Const0 | SogKind::Const1
            ) && name_map.insert(nd.identity.clone(), nd.id).is_some()
            {
                return Err(SogError::Document(format!("duplicate identity `{}`", nd.identity)));
            }
            nodes.push(SogNode {
                kind: nd.kind,
                fanin: nd.fanin.clone(),
                identity: nd.identity.clone(),
            });
        }
        let of = |k: SogKind| -> Vec<u32> {
            (0..nodes.len() as u32)
                .filter(|&i| nodes[i as usize].kind == k)
                .collect()
        };
        let g = SogGraph {
            name: doc.name.clone(),
            inputs: of(SogKind::Pi),
            outputs: of(SogKind::Po),
            registers: of(SogKind::Dff),
            clock_period_ns: doc.clock_period_ns,
            name_map,
            nodes,
        };
        g.validate()?;
        Ok(g)
    }
}

/// Serialized SOG, optionally carrying per-node activity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SogDoc {
    pub name: String,
    pub clock_period_ns: f64,
    pub nodes: Vec<SogNodeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SogNodeDoc {
    pub id: u32,
    pub kind: SogKind,
    pub fanin: Vec<u32>,
    pub identity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Design-scale characteristics of a SOG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignFeatures {
    /// Node counts in [`SogKind::ALL`] order.
    pub counts: [u64; 10],
    pub n_registers: u64,
    pub n_pi: u64,
    pub n_po: u64,
    pub combinational_depth: u64,
    pub total_fanout: u64,
    pub mean_fanout: f64,
}

impl DesignFeatures {
    pub const NAMES: [&'static str; 16] = [
        "n_PI", "n_PO", "n_CONST0", "n_CONST1", "n_NOT", "n_AND2", "n_OR2", "n_XOR2", "n_MUX2",
        "n_DFF", "n_registers", "n_pi", "n_po", "depth", "total_fanout", "mean_fanout",
    ];

    pub fn count(&self, kind: SogKind) -> u64 {
        self.counts[kind.index()]
    }

    pub fn gate_count(&self) -> u64 {
        SogKind::GATES.iter().map(|&k| self.count(k)).sum()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        v.extend([
            self.n_registers as f64,
            self.n_pi as f64,
            self.n_po as f64,
            self.combinational_depth as f64,
            self.total_fanout as f64,
            self.mean_fanout,
        ]);
        v
    }
}

pub fn sog_features(graph: &SogGraph) -> DesignFeatures {
    let mut counts = [0u64; 10];
    for n in &graph.nodes {
        counts[n.kind.index()] += 1;
    }
    let total_fanout: u64 = graph.nodes.iter().map(|n| n.fanin.len() as u64).sum();
    let drivers = graph.nodes.len() as u64 - counts[SogKind::Po.index()];
    let depth = graph.levels().into_iter().max().unwrap_or(0);
    DesignFeatures {
        counts,
        n_registers: counts[SogKind::Dff.index()],
        n_pi: counts[SogKind::Pi.index()],
        n_po: counts[SogKind::Po.index()],
        combinational_depth: u64::from(depth),
        total_fanout,
        mean_fanout: if drivers == 0 {
            0.0
        } else {
            total_fanout as f64 / drivers as f64
        },
    }
}

/// Incremental graph construction. `push` registers PIs, POs and DFFs in
/// the port/register lists in creation order.
#[derive(Default)]
pub struct SogBuilder {
    pub nodes: Vec<SogNode>,
    pub name_map: BTreeMap<String, u32>,
    pub inputs: Vec<u32>,
    pub outputs: Vec<u32>,
    pub registers: Vec<u32>,
    const_ids: [Option<u32>; 2],
}

impl SogBuilder {
    pub fn push(&mut self, kind: SogKind, fanin: Vec<u32>, identity: Option<String>) -> u32 {
        let id = self.nodes.len() as u32;
        let identity = identity.unwrap_or_else(|| format!("g{id}"));
        match kind {
            SogKind::Pi => self.inputs.push(id),
            SogKind::Po => self.outputs.push(id),
            SogKind::Dff => self.registers.push(id),
            _ => {}
        }
        if matches!(kind, SogKind::Pi | SogKind::Dff | SogKind::Const0 | SogKind::Const1) {
            self.name_map.insert(identity.clone(), id);
        }
        self.nodes.push(SogNode {
            kind,
            fanin,
            identity,
        });
        id
    }

    pub fn constant(&mut self, value: bool) -> u32 {
        if let Some(id) = self.const_ids[value as usize] {
            return id;
        }
        let (kind, name) = if value {
            (SogKind::Const1, "CONST1")
        } else {
            (SogKind::Const0, "CONST0")
        };
        let id = self.push(kind, Vec::new(), Some(name.to_string()));
        self.const_ids[value as usize] = Some(id);
        id
    }

    pub fn finish(self, name: String, clock_period_ns: f64) -> SogGraph {
        SogGraph {
            name,
            nodes: self.nodes,
            name_map: self.name_map,
            inputs: self.inputs,
            outputs: self.outputs,
            registers: self.registers,
            clock_period_ns,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{generate_design, GenParams, WordDesign};

    fn design(ports: &str, nets: &str, nodes: &str) -> WordDesign {
        WordDesign::parse(&format!(
            r#"{{"name":"t","clock_period_ns":1.0,"ports":[{ports}],"nets":[{nets}],"nodes":[{nodes}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn empty_design_has_no_gates() {
        let d = design(
            r#"{"name":"a","dir":"input","width":4},{"name":"y","dir":"output","width":4}"#,
            r#"{"name":"t","width":2}"#,
            r#"{"kind":"SLICE","inputs":["a"],"output":"t","params":{"hi":3,"lo":2}},
               {"kind":"CONCAT","inputs":["t","t"],"output":"y"}"#,
        );
        let f = sog_features(&lower(&d));
        assert_eq!(f.gate_count(), 0);
        assert_eq!(f.combinational_depth, 0);
        assert_eq!(f.n_pi, 4);
        assert_eq!(f.n_po, 4);
    }

    #[test]
    fn eight_registers_counted() {
        let regs: Vec<String> = (0..8)
            .map(|i| format!(r#"{{"kind":"REG","inputs":["a{i}"],"output":"q{i}"}}"#))
            .collect();
        let ports: Vec<String> = (0..8)
            .flat_map(|i| {
                [
                    format!(r#"{{"name":"a{i}","dir":"input","width":1}}"#),
                    format!(r#"{{"name":"q{i}","dir":"output","width":1}}"#),
                ]
            })
            .collect();
        let d = design(&ports.join(","), "", &regs.join(","));
        let g = lower(&d);
        assert_eq!(sog_features(&g).n_registers, 8);
        assert_eq!(g.registers.len(), 8);
    }

    /// Second, independent recount: BFS from the outputs over fanin edges.
    fn recount(g: &SogGraph) -> ([u64; 10], u64) {
        let mut seen = vec![false; g.len()];
        let mut queue: std::collections::VecDeque<u32> = g
            .outputs
            .iter()
            .chain(&g.registers)
            .chain(&g.inputs)
            .copied()
            .collect();
        let mut counts = [0u64; 10];
        let mut edges = 0;
        while let Some(id) = queue.pop_front() {
            if std::mem::replace(&mut seen[id as usize], true) {
                continue;
            }
            let node = &g.nodes[id as usize];
            counts[SogKind::ALL.iter().position(|&k| k == node.kind).unwrap()] += 1;
            edges += node.fanin.len() as u64;
            queue.extend(node.fanin.iter().copied());
        }
        (counts, edges)
    }

    #[test]
    fn features_match_independent_recount() {
        let d = generate_design(&GenParams {
            seed: 7,
            n_stages: 3,
            ..GenParams::default()
        })
        .unwrap();
        let g = lower(&d);
        let f = sog_features(&g);
        let (counts, edges) = recount(&g);
        assert_eq!(f.counts, counts);
        assert_eq!(f.total_fanout, edges);
        assert_eq!(f.n_registers as usize, d.register_bits());
    }

    #[test]
    fn prune_is_idempotent() {
        for seed in 0..20 {
            let d = generate_design(&GenParams {
                seed,
                ..GenParams::default()
            })
            .unwrap();
            let g = lower(&d);
            assert_eq!(g.prune(), g);
        }
    }

    #[test]
    fn doc_round_trip() {
        let d = generate_design(&GenParams::default()).unwrap();
        let g = lower(&d);
        let text = serde_json::to_string(&g.to_doc()).unwrap();
        let back = SogGraph::from_doc(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.nodes, g.nodes);
        assert_eq!(back.clock_period_ns, g.clock_period_ns);
    }

    #[test]
    fn validate_rejects_bad_arity() {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        let x = b.push(SogKind::And2, vec![a], None);
        b.push(SogKind::Po, vec![x], Some("y[0]".into()));
        let g = b.finish("bad".into(), 1.0);
        assert!(matches!(g.validate(), Err(SogError::Malformed { id: 1, .. })));
    }

    #[test]
    fn cycle_detected() {
        let mut b = SogBuilder::default();
        b.push(SogKind::Not, vec![1], None);
        b.push(SogKind::Not, vec![0], None);
        let g = b.finish("loop".into(), 1.0);
        assert!(matches!(g.topo_order(), Err(SogError::Cycle(_))));
    }
}
