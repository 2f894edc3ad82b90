// SPDX-License-Identifier: Apache-2.0

//! Library-annotated static timing analysis on the SOG.
//!
//! Each gate maps 1:1 onto a library cell. Load is pin capacitance plus a
//! per-fanout wire capacitance (plus a fixed port load for POs); delay and
//! output slew come from the cell tables at the worst input slew. Endpoints
//! are DFF data pins (checked against setup) and primary outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::liberty::{CellAttr, Library, LibertyError};
use crate::sog::{SogError, SogGraph, SogKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimingError {
    #[error("no library cell bound to SOG kind {0}")]
    Unbound(SogKind),
    #[error(transparent)]
    Liberty(#[from] LibertyError),
    #[error(transparent)]
    Graph(#[from] SogError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub default_input_slew_ns: f64,
    pub wire_cap_per_fanout_ff: f64,
    pub po_load_ff: f64,
    pub cell_binding: BTreeMap<SogKind, String>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        let cell_binding = [
            (SogKind::Not, "INV_X1"),
            (SogKind::And2, "AND2_X1"),
            (SogKind::Or2, "OR2_X1"),
            (SogKind::Xor2, "XOR2_X1"),
            (SogKind::Mux2, "MUX2_X1"),
            (SogKind::Dff, "DFF_X1"),
        ]
        .into_iter()
        .map(|(k, c)| (k, c.to_string()))
        .collect();
        TimingConfig {
            default_input_slew_ns: 0.02,
            wire_cap_per_fanout_ff: 1.0,
            po_load_ff: 2.0,
            cell_binding,
        }
    }
}

impl TimingConfig {
    /// Library cell for `kind`, `None` for PI/PO/constants.
    pub fn cell_for(&self, kind: SogKind) -> Result<Option<&str>, TimingError> {
        if kind.is_gate() || kind == SogKind::Dff {
            self.cell_binding
                .get(&kind)
                .map(|c| Some(c.as_str()))
                .ok_or(TimingError::Unbound(kind))
        } else {
            Ok(None)
        }
    }
}

/// A SOG with per-node delay, output slew and load.
#[derive(Clone, Debug)]
pub struct AnnotatedGraph<'g> {
    pub graph: &'g SogGraph,
    /// Cell delay; for DFFs the clock-to-q launch delay.
    pub delay_ns: Vec<f64>,
    pub slew_ns: Vec<f64>,
    pub load_ff: Vec<f64>,
    pub fanout: Vec<u32>,
    pub setup_ns: f64,
}

impl<'g> AnnotatedGraph<'g> {
    /// Annotation with explicit delays, zero slews and loads.
    pub fn with_delays(graph: &'g SogGraph, delay_ns: Vec<f64>, setup_ns: f64) -> Self {
        let n = graph.len();
        let mut fanout = vec![0u32; n];
        for node in &graph.nodes {
            for &f in &node.fanin {
                fanout[f as usize] += 1;
            }
        }
        AnnotatedGraph {
            graph,
            delay_ns,
            slew_ns: vec![0.0; n],
            load_ff: vec![0.0; n],
            fanout,
            setup_ns,
        }
    }
}

/// Capacitive load per node under `cfg`.
pub fn node_loads(graph: &SogGraph, lib: &Library, cfg: &TimingConfig) -> Result<Vec<f64>, TimingError> {
    let mut load = vec![0.0; graph.len()];
    for node in &graph.nodes {
        let cell = match cfg.cell_for(node.kind)? {
            Some(c) => Some(lib.cell(c)?),
            None => None,
        };
        for (pos, &f) in node.fanin.iter().enumerate() {
            let pin = match (node.kind, cell) {
                (SogKind::Po, _) => cfg.po_load_ff,
                (_, Some(c)) => c.input_cap(pos),
                _ => 0.0,
            };
            load[f as usize] += pin + cfg.wire_cap_per_fanout_ff;
        }
    }
    Ok(load)
}

pub fn annotate<'g>(
    graph: &'g SogGraph,
    lib: &Library,
    cfg: &TimingConfig,
) -> Result<AnnotatedGraph<'g>, TimingError> {
    let n = graph.len();
    let load = node_loads(graph, lib, cfg)?;
    let mut delay = vec![0.0; n];
    let mut slew = vec![cfg.default_input_slew_ns; n];
    let mut fanout = vec![0u32; n];
    for node in &graph.nodes {
        for &f in &node.fanin {
            fanout[f as usize] += 1;
        }
    }
    let setup_ns = match cfg.cell_binding.get(&SogKind::Dff) {
        Some(c) => lib.cell_attr(c, &CellAttr::Setup)?,
        None if graph.registers.is_empty() => 0.0,
        None => return Err(TimingError::Unbound(SogKind::Dff)),
    };
    for id in graph.topo_order()? {
        let i = id as usize;
        let node = &graph.nodes[i];
        match node.kind {
            SogKind::Pi | SogKind::Const0 | SogKind::Const1 => {}
            SogKind::Po => slew[i] = slew[node.fanin[0] as usize],
            SogKind::Dff => {
                let cell = cfg.cell_for(SogKind::Dff)?.expect("DFF has a cell");
                let (d, s) = lib.delay_of(cell, cfg.default_input_slew_ns, load[i])?;
                delay[i] = d;
                slew[i] = s;
            }
            kind => {
                let cell = cfg.cell_for(kind)?.expect("gates have cells");
                let s_in = node
                    .fanin
                    .iter()
                    .map(|&f| slew[f as usize])
                    .fold(0.0, f64::max);
                let (d, s) = lib.delay_of(cell, s_in, load[i])?;
                delay[i] = d;
                slew[i] = s;
            }
        }
    }
    Ok(AnnotatedGraph {
        graph,
        delay_ns: delay,
        slew_ns: slew,
        load_ff: load,
        fanout,
        setup_ns,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    Dff,
    Po,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Endpoint {
    pub node: u32,
    pub kind: EndpointKind,
    pub identity: String,
    /// Arrival at the capture pin.
    pub arrival_ns: f64,
    /// Setup for DFF endpoints, 0 for outputs.
    pub margin_ns: f64,
    pub slack_ns: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingResult {
    pub clock_period_ns: f64,
    pub arrival_ns: Vec<f64>,
    pub slew_ns: Vec<f64>,
    pub load_ff: Vec<f64>,
    pub endpoints: Vec<Endpoint>,
    pub wns_r: f64,
    pub tns_r: f64,
}

/// Forward arrival propagation and endpoint slack.
///
/// With no endpoints at all `wns_r` is the clock period.
pub fn sta(ann: &AnnotatedGraph<'_>, clock_period_ns: f64) -> Result<TimingResult, TimingError> {
    let g = ann.graph;
    let mut arrival = vec![0.0; g.len()];
    for id in g.topo_order()? {
        let i = id as usize;
        let node = &g.nodes[i];
        arrival[i] = match node.kind {
            SogKind::Pi | SogKind::Const0 | SogKind::Const1 => 0.0,
            SogKind::Dff => ann.delay_ns[i],
            _ => {
                node.fanin
                    .iter()
                    .map(|&f| arrival[f as usize])
                    .fold(0.0, f64::max)
                    + ann.delay_ns[i]
            }
        };
    }
    let mut endpoints = Vec::new();
    for (id, node) in g.nodes.iter().enumerate() {
        let (kind, margin) = match node.kind {
            SogKind::Dff => (EndpointKind::Dff, ann.setup_ns),
            SogKind::Po => (EndpointKind::Po, 0.0),
            _ => continue,
        };
        let at = if kind == EndpointKind::Dff {
            arrival[node.fanin[0] as usize]
        } else {
            arrival[id]
        };
        endpoints.push(Endpoint {
            node: id as u32,
            kind,
            identity: node.identity.clone(),
            arrival_ns: at,
            margin_ns: margin,
            slack_ns: clock_period_ns - at - margin,
        });
    }
    let wns_r = endpoints
        .iter()
        .map(|e| e.slack_ns)
        .reduce(f64::min)
        .unwrap_or(clock_period_ns);
    let tns_r = endpoints.iter().map(|e| e.slack_ns.min(0.0)).sum();
    Ok(TimingResult {
        clock_period_ns,
        arrival_ns: arrival,
        slew_ns: ann.slew_ns.clone(),
        load_ff: ann.load_ff.clone(),
        endpoints,
        wns_r,
        tns_r,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub source_identity: String,
    pub sink_identity: String,
    pub sink_kind: EndpointKind,
    /// Launch point first, endpoint node last.
    pub nodes: Vec<u32>,
    pub analytical_delay_ns: f64,
    pub slack_ns: f64,
}

impl Path {
    pub fn key(&self) -> PathKey {
        (
            self.source_identity.clone(),
            self.sink_identity.clone(),
            self.sink_kind,
        )
    }
}

/// Source identity, sink identity, endpoint kind.
pub type PathKey = (String, String, EndpointKind);

/// Number of paths kept out of `n_endpoints`.
pub fn worst_count(n_endpoints: usize, fraction: f64) -> usize {
    let k = (fraction * n_endpoints as f64).ceil() as usize;
    k.max(16).min(n_endpoints)
}

/// Worst path per endpoint by argmax backtracking (ties to the lowest
/// fanin id), most critical first, truncated to [`worst_count`].
pub fn worst_paths(result: &TimingResult, ann: &AnnotatedGraph<'_>, fraction: f64) -> Vec<Path> {
    let mut all = all_worst_paths(result, ann);
    all.truncate(worst_count(all.len(), fraction));
    all
}

/// One worst path per endpoint, sorted by ascending slack.
pub fn all_worst_paths(result: &TimingResult, ann: &AnnotatedGraph<'_>) -> Vec<Path> {
    let g = ann.graph;
    let mut order: Vec<&Endpoint> = result.endpoints.iter().collect();
    // arrival + margin orders slack independently of the clock period
    order.sort_by(|a, b| {
        (b.arrival_ns + b.margin_ns)
            .total_cmp(&(a.arrival_ns + a.margin_ns))
            .then(a.node.cmp(&b.node))
    });
    order
        .into_iter()
        .map(|ep| {
            let mut nodes = vec![ep.node];
            let mut cur = g.nodes[ep.node as usize].fanin[0];
            loop {
                nodes.push(cur);
                let node = &g.nodes[cur as usize];
                if !(node.kind.is_gate() || node.kind == SogKind::Po) {
                    break;
                }
                cur = *node
                    .fanin
                    .iter()
                    .min_by(|&&a, &&b| {
                        result.arrival_ns[b as usize]
                            .total_cmp(&result.arrival_ns[a as usize])
                            .then(a.cmp(&b))
                    })
                    .expect("gates have fanins");
            }
            nodes.reverse();
            let source = &g.nodes[nodes[0] as usize];
            Path {
                source_identity: source.identity.clone(),
                sink_identity: ep.identity.clone(),
                sink_kind: ep.kind,
                analytical_delay_ns: nodes[..nodes.len() - 1]
                    .iter()
                    .map(|&n| ann.delay_ns[n as usize])
                    .sum(),
                slack_ns: ep.slack_ns,
                nodes,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathFeatureVector {
    pub n_ops: u32,
    /// Gate counts in [`SogKind::GATES`] order.
    pub kind_counts: [u32; 5],
    pub delay_ns: f64,
    pub max_fanout: u32,
    pub is_dff: bool,
}

impl PathFeatureVector {
    pub const NAMES: [&'static str; 9] = [
        "n_ops", "n_NOT", "n_AND2", "n_OR2", "n_XOR2", "n_MUX2", "delay_ns", "max_fanout", "is_dff",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![f64::from(self.n_ops)];
        v.extend(self.kind_counts.iter().map(|&c| f64::from(c)));
        v.extend([self.delay_ns, f64::from(self.max_fanout), self.is_dff as u8 as f64]);
        v
    }
}

pub fn path_features(path: &Path, ann: &AnnotatedGraph<'_>) -> PathFeatureVector {
    let body = &path.nodes[..path.nodes.len() - 1];
    let mut kind_counts = [0u32; 5];
    for &n in body {
        let kind = ann.graph.kind(n);
        if let Some(k) = SogKind::GATES.iter().position(|&g| g == kind) {
            kind_counts[k] += 1;
        }
    }
    PathFeatureVector {
        n_ops: kind_counts.iter().sum(),
        kind_counts,
        delay_ns: body.iter().map(|&n| ann.delay_ns[n as usize]).sum(),
        max_fanout: body.iter().map(|&n| ann.fanout[n as usize]).max().unwrap_or(0),
        is_dff: path.sink_kind == EndpointKind::Dff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{generate_design, GenParams};
    use crate::liberty::fixture_library;
    use crate::sog::{lower, SogBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain_slack() {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        let n = b.push(SogKind::Not, vec![a], None);
        let x = b.push(SogKind::And2, vec![n, a], None);
        b.push(SogKind::Dff, vec![x], Some("r[0]".into()));
        let g = b.finish("chain".into(), 1.0);
        let ann = AnnotatedGraph::with_delays(&g, vec![0.0, 0.10, 0.20, 0.07], 0.05);
        let r = sta(&ann, 1.0).unwrap();
        assert_eq!(r.endpoints.len(), 1);
        assert!((r.endpoints[0].slack_ns - 0.65).abs() < 1e-12);
    }

    #[test]
    fn wns_tns_definitions() {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        for i in 0..3 {
            b.push(SogKind::Po, vec![a], Some(format!("y[{i}]")));
        }
        let g = b.finish("three".into(), 1.0);
        let ann = AnnotatedGraph::with_delays(&g, vec![0.0; 4], 0.0);
        let mut r = sta(&ann, 1.0).unwrap();
        for (e, s) in r.endpoints.iter_mut().zip([-0.2, 0.1, -0.5]) {
            e.slack_ns = s;
        }
        let wns = r.endpoints.iter().map(|e| e.slack_ns).fold(f64::INFINITY, f64::min);
        let tns: f64 = r.endpoints.iter().map(|e| e.slack_ns.min(0.0)).sum();
        assert_eq!(wns, -0.5);
        assert!((tns + 0.7).abs() < 1e-12);
    }

    fn fixture_graph(seed: u64) -> SogGraph {
        lower(
            &generate_design(&GenParams {
                seed,
                ..GenParams::default()
            })
            .unwrap(),
        )
    }

    #[test]
    fn load_of_three_and_fanouts() {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        let c = b.push(SogKind::Pi, vec![], Some("c[0]".into()));
        for i in 0..3 {
            let x = b.push(SogKind::And2, vec![a, c], None);
            b.push(SogKind::Po, vec![x], Some(format!("y[{i}]")));
        }
        let g = b.finish("fan".into(), 1.0);
        let lib = fixture_library();
        let ann = annotate(&g, &lib, &TimingConfig::default()).unwrap();
        assert_eq!(ann.load_ff[a as usize], 6.0);
        // PO load 2.0 + wire 1.0
        assert_eq!(ann.load_ff[2], 3.0);
    }

    #[test]
    fn zero_fanout_uses_clamped_table() {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        let n = b.push(SogKind::Not, vec![a], None);
        let g = b.finish("dangling".into(), 1.0);
        let lib = fixture_library();
        let cfg = TimingConfig::default();
        let ann = annotate(&g, &lib, &cfg).unwrap();
        assert_eq!(ann.load_ff[n as usize], 0.0);
        let (d, _) = lib.delay_of("INV_X1", cfg.default_input_slew_ns, 0.0).unwrap();
        assert_eq!(ann.delay_ns[n as usize], d);
    }

    #[test]
    fn wire_cap_never_lowers_delay() {
        let lib = fixture_library();
        let g = fixture_graph(3);
        let lo = annotate(&g, &lib, &TimingConfig::default()).unwrap();
        let hi = annotate(
            &g,
            &lib,
            &TimingConfig {
                wire_cap_per_fanout_ff: 2.5,
                ..TimingConfig::default()
            },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..20 {
            let i = rng.gen_range(0..g.len());
            assert!(hi.delay_ns[i] >= lo.delay_ns[i]);
        }
    }

    #[test]
    fn unbound_kind_is_error() {
        let g = fixture_graph(1);
        let mut cfg = TimingConfig::default();
        cfg.cell_binding.remove(&SogKind::Xor2);
        cfg.cell_binding.remove(&SogKind::And2);
        assert!(matches!(
            annotate(&g, &fixture_library(), &cfg),
            Err(TimingError::Unbound(_))
        ));
        let mut cfg = TimingConfig::default();
        cfg.cell_binding.insert(SogKind::Not, "NAND9".into());
        assert!(annotate(&g, &fixture_library(), &cfg).is_err());
    }

    #[test]
    fn worst_count_arithmetic() {
        assert_eq!(worst_count(2000, 0.01), 20);
        assert_eq!(worst_count(100, 0.01), 16);
        assert_eq!(worst_count(5, 0.01), 5);
        assert_eq!(worst_count(1, 0.01), 1);
    }

    #[test]
    fn single_endpoint_path() {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        let n = b.push(SogKind::Not, vec![a], None);
        b.push(SogKind::Po, vec![n], Some("y[0]".into()));
        let g = b.finish("one".into(), 1.0);
        let lib = fixture_library();
        let ann = annotate(&g, &lib, &TimingConfig::default()).unwrap();
        let r = sta(&ann, 1.0).unwrap();
        let paths = worst_paths(&r, &ann, 0.01);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].nodes, vec![0, 1, 2]);
        assert_eq!(paths[0].analytical_delay_ns, r.endpoints[0].arrival_ns);
        assert_eq!(paths[0].source_identity, "a[0]");
        assert_eq!(paths[0].sink_identity, "y[0]");
        let f = path_features(&paths[0], &ann);
        assert_eq!(f.n_ops, 1);
        assert_eq!(f.kind_counts, [1, 0, 0, 0, 0]);
    }

    #[test]
    fn diamond_tie_breaks_to_lower_id() {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        let l = b.push(SogKind::Not, vec![a], None);
        let r = b.push(SogKind::Not, vec![a], None);
        let j = b.push(SogKind::And2, vec![r, l], None);
        let o = b.push(SogKind::Not, vec![j], None);
        b.push(SogKind::Po, vec![o], Some("y[0]".into()));
        let g = b.finish("diamond".into(), 1.0);
        let ann = AnnotatedGraph::with_delays(&g, vec![0.0, 0.1, 0.1, 0.2, 0.1, 0.0], 0.0);
        let res = sta(&ann, 1.0).unwrap();
        let p = &worst_paths(&res, &ann, 0.01)[0];
        assert_eq!(p.nodes, vec![a, l, j, o, 5]);
    }

    #[test]
    fn backtracked_delay_equals_arrival() {
        let lib = fixture_library();
        for seed in 0..10 {
            let g = fixture_graph(seed);
            let ann = annotate(&g, &lib, &TimingConfig::default()).unwrap();
            let r = sta(&ann, g.clock_period_ns).unwrap();
            let paths = all_worst_paths(&r, &ann);
            assert_eq!(paths.len(), r.endpoints.len());
            for p in &paths {
                let ep = r.endpoints.iter().find(|e| e.node == *p.nodes.last().unwrap()).unwrap();
                assert!((p.analytical_delay_ns - ep.arrival_ns).abs() < 1e-12);
                for w in p.nodes.windows(2) {
                    assert!(g.nodes[w[1] as usize].fanin.contains(&w[0]));
                }
            }
            assert!(r.tns_r <= 0.0);
            assert_eq!(r.tns_r == 0.0, r.wns_r >= 0.0);
        }
    }

    #[test]
    fn clock_shift_moves_slack_only() {
        let lib = fixture_library();
        let g = fixture_graph(11);
        let ann = annotate(&g, &lib, &TimingConfig::default()).unwrap();
        let a = sta(&ann, 1.0).unwrap();
        let b = sta(&ann, 1.25).unwrap();
        for (x, y) in a.endpoints.iter().zip(&b.endpoints) {
            assert!((y.slack_ns - x.slack_ns - 0.25).abs() < 1e-12);
        }
        let pa = worst_paths(&a, &ann, 0.01);
        let pb = worst_paths(&b, &ann, 0.01);
        let nodes = |ps: &[Path]| ps.iter().map(|p| p.nodes.clone()).collect::<Vec<_>>();
        assert_eq!(nodes(&pa), nodes(&pb));
    }

    #[test]
    fn features_invariant_under_relabeling() {
        let lib = fixture_library();
        let g = fixture_graph(5);
        // reverse node order
        let n = g.len() as u32;
        let mut rev = g.clone();
        rev.nodes = g
            .nodes
            .iter()
            .rev()
            .map(|node| crate::sog::SogNode {
                kind: node.kind,
                fanin: node.fanin.iter().map(|&f| n - 1 - f).collect(),
                identity: node.identity.clone(),
            })
            .collect();
        let flip = |ids: &[u32]| ids.iter().map(|&i| n - 1 - i).collect::<Vec<_>>();
        rev.inputs = flip(&g.inputs);
        rev.outputs = flip(&g.outputs);
        rev.registers = flip(&g.registers);
        let cfg = TimingConfig::default();
        let feats = |g: &SogGraph| {
            let ann = annotate(g, &lib, &cfg).unwrap();
            let r = sta(&ann, 1.0).unwrap();
            let mut v: Vec<(String, Vec<f64>)> = all_worst_paths(&r, &ann)
                .iter()
                .map(|p| (p.sink_identity.clone(), path_features(p, &ann).to_vec()))
                .collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        };
        let (fa, fb) = (feats(&g), feats(&rev));
        assert_eq!(fa.len(), fb.len());
        for ((ia, va), (ib, vb)) in fa.iter().zip(&fb) {
            assert_eq!(ia, ib);
            assert_eq!(va, vb);
        }
    }
}
