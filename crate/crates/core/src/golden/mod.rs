// SPDX-License-Identifier: Apache-2.0

//! Reference flow producing ground-truth labels: peephole optimization and
//! structural hashing on the SOG, 1:1 cell mapping, exact STA, Monte-Carlo
//! power and exact area.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::simulate_activity;
use crate::frontend::WordDesign;
use crate::liberty::{CellAttr, Library, LibertyError};
use crate::sog::{lower, SogBuilder, SogGraph, SogKind};
use crate::timing::{
    all_worst_paths, annotate, node_loads, sta, EndpointKind, TimingConfig, TimingError,
};

/// Upper bound on optimization passes; in practice two or three suffice.
const MAX_PASSES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GoldenError {
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Liberty(#[from] LibertyError),
    #[error("invalid power configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub vdd_v: f64,
    /// Defaults to the design's clock frequency when absent.
    pub freq_ghz: Option<f64>,
    pub mc_cycles: usize,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            vdd_v: 1.0,
            freq_ghz: None,
            mc_cycles: 1024,
            seed: 0,
        }
    }
}

impl PowerConfig {
    fn validate(&self) -> Result<(), GoldenError> {
        let freq_ok = self.freq_ghz.map_or(true, |f| f.is_finite() && f > 0.0);
        if !(self.vdd_v.is_finite() && self.vdd_v > 0.0) || !freq_ok || self.mc_cycles < 2 {
            return Err(GoldenError::Config(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenPath {
    pub source: String,
    pub sink: String,
    pub kind: EndpointKind,
    pub delay_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenLabels {
    pub wns_ns: f64,
    pub tns_ns: f64,
    pub power_uw: f64,
    pub area_comb: f64,
    pub area_seq: f64,
    /// Worst path per endpoint, sorted by (source, sink, kind).
    pub paths: Vec<GoldenPath>,
    pub nodes_before: usize,
    pub nodes_after: usize,
}

impl GoldenLabels {
    pub fn area_total(&self) -> f64 {
        self.area_seq + self.area_comb
    }

    pub fn path_map(&self) -> BTreeMap<(&str, &str, EndpointKind), f64> {
        self.paths
            .iter()
            .map(|p| ((p.source.as_str(), p.sink.as_str(), p.kind), p.delay_ns))
            .collect()
    }
}

/// One rewrite pass: constant folding, double-NOT removal and structural
/// hashing in topological order, then dead-node pruning.
fn rewrite(g: &SogGraph) -> SogGraph {
    let order = g.topo_order().expect("SOG is acyclic");
    let mut b = SogBuilder::default();
    let mut map = vec![u32::MAX; g.len()];
    for &pi in &g.inputs {
        let node = &g.nodes[pi as usize];
        map[pi as usize] = b.push(SogKind::Pi, Vec::new(), Some(node.identity.clone()));
    }
    for &r in &g.registers {
        let node = &g.nodes[r as usize];
        map[r as usize] = b.push(SogKind::Dff, vec![u32::MAX], Some(node.identity.clone()));
    }
    let mut hashed: BTreeMap<(SogKind, Vec<u32>), u32> = BTreeMap::new();
    for &id in &order {
        let node = &g.nodes[id as usize];
        let fanin: Vec<u32> = node.fanin.iter().map(|&f| map[f as usize]).collect();
        map[id as usize] = match node.kind {
            SogKind::Pi | SogKind::Dff | SogKind::Po => continue,
            SogKind::Const0 => b.constant(false),
            SogKind::Const1 => b.constant(true),
            kind => simplify(&mut b, &mut hashed, kind, fanin),
        };
    }
    for &r in &g.registers {
        let d = g.nodes[r as usize].fanin[0];
        b.nodes[map[r as usize] as usize].fanin[0] = map[d as usize];
    }
    for &po in &g.outputs {
        let node = &g.nodes[po as usize];
        b.push(SogKind::Po, vec![map[node.fanin[0] as usize]], Some(node.identity.clone()));
    }
    b.finish(g.name.clone(), g.clock_period_ns).prune()
}

fn constant_of(b: &SogBuilder, id: u32) -> Option<bool> {
    match b.nodes[id as usize].kind {
        SogKind::Const0 => Some(false),
        SogKind::Const1 => Some(true),
        _ => None,
    }
}

fn simplify(
    b: &mut SogBuilder,
    hashed: &mut BTreeMap<(SogKind, Vec<u32>), u32>,
    kind: SogKind,
    fanin: Vec<u32>,
) -> u32 {
    let c = |b: &SogBuilder, i: usize, f: &[u32]| constant_of(b, f[i]);
    match kind {
        SogKind::Not => {
            if let Some(v) = c(b, 0, &fanin) {
                return b.constant(!v);
            }
            let inner = &b.nodes[fanin[0] as usize];
            if inner.kind == SogKind::Not {
                return inner.fanin[0];
            }
        }
        SogKind::And2 | SogKind::Or2 | SogKind::Xor2 => {
            for side in 0..2 {
                let other = fanin[1 - side];
                match (kind, c(b, side, &fanin)) {
                    (SogKind::And2, Some(false)) => return b.constant(false),
                    (SogKind::And2, Some(true)) => return other,
                    (SogKind::Or2, Some(true)) => return b.constant(true),
                    (SogKind::Or2, Some(false)) => return other,
                    (SogKind::Xor2, Some(false)) => return other,
                    (SogKind::Xor2, Some(true)) => {
                        return simplify(b, hashed, SogKind::Not, vec![other])
                    }
                    _ => {}
                }
            }
        }
        SogKind::Mux2 => {
            if let Some(sel) = c(b, 0, &fanin) {
                return if sel { fanin[1] } else { fanin[2] };
            }
            if fanin[1] == fanin[2] {
                return fanin[1];
            }
        }
        _ => unreachable!("only gates are simplified"),
    }
    // commutative gates hash on sorted fanins; the node keeps its pin order
    let mut key = fanin.clone();
    if kind != SogKind::Mux2 {
        key.sort_unstable();
    }
    if let Some(&id) = hashed.get(&(kind, key.clone())) {
        return id;
    }
    let id = b.push(kind, fanin, None);
    hashed.insert((kind, key), id);
    id
}

/// Rewrite to a fixed point. DFFs and port nodes keep their identities and
/// are never removed or merged.
pub fn optimize(graph: &SogGraph) -> SogGraph {
    let mut g = rewrite(graph);
    for _ in 0..MAX_PASSES {
        let next = rewrite(&g);
        if next == g {
            break;
        }
        g = next;
    }
    g
}

/// A SOG with one library cell per gate and DFF.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedGraph {
    pub graph: SogGraph,
    pub cells: Vec<Option<String>>,
}

impl MappedGraph {
    pub fn area_comb(&self, lib: &Library) -> Result<f64, GoldenError> {
        self.area_where(lib, |k| k.is_gate())
    }

    pub fn area_seq(&self, lib: &Library) -> Result<f64, GoldenError> {
        self.area_where(lib, |k| k == SogKind::Dff)
    }

    fn area_where(&self, lib: &Library, pick: impl Fn(SogKind) -> bool) -> Result<f64, GoldenError> {
        let mut area = 0.0;
        for (node, cell) in self.graph.nodes.iter().zip(&self.cells) {
            if let (true, Some(c)) = (pick(node.kind), cell) {
                area += lib.cell_attr(c, &CellAttr::Area)?;
            }
        }
        Ok(area)
    }
}

pub fn map_cells(graph: &SogGraph, lib: &Library, cfg: &TimingConfig) -> Result<MappedGraph, GoldenError> {
    let cells = graph
        .nodes
        .iter()
        .map(|n| match cfg.cell_for(n.kind)? {
            Some(c) => lib.cell(c).map(|_| Some(c.to_string())).map_err(GoldenError::from),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>, GoldenError>>()?;
    Ok(MappedGraph {
        graph: graph.clone(),
        cells,
    })
}

/// `freq * sum(alpha * (e_int + 0.5 * c_load * vdd^2)) + leakage`, in uW
/// for fJ, fF, V and GHz.
pub fn power_uw(terms: impl IntoIterator<Item = (f64, f64, f64)>, leakage_uw: f64, vdd_v: f64, freq_ghz: f64) -> f64 {
    let dynamic: f64 = terms
        .into_iter()
        .map(|(alpha, e_int, c_load)| alpha * (e_int + 0.5 * c_load * vdd_v * vdd_v))
        .sum();
    freq_ghz * dynamic + leakage_uw
}

pub fn golden_label(
    design: &WordDesign,
    lib: &Library,
    timing: &TimingConfig,
    power: &PowerConfig,
) -> Result<GoldenLabels, GoldenError> {
    power.validate()?;
    let lowered = lower(design);
    let g = optimize(&lowered);
    let mapped = map_cells(&g, lib, timing)?;
    let t = g.clock_period_ns;

    let ann = annotate(&g, lib, timing)?;
    let result = sta(&ann, t)?;
    let mut capture = vec![0.0; g.len()];
    for ep in &result.endpoints {
        capture[ep.node as usize] = ep.arrival_ns;
    }
    let mut paths: Vec<GoldenPath> = all_worst_paths(&result, &ann)
        .into_iter()
        .map(|p| GoldenPath {
            delay_ns: capture[*p.nodes.last().expect("paths are non-empty") as usize],
            source: p.source_identity,
            sink: p.sink_identity,
            kind: p.sink_kind,
        })
        .collect();
    paths.sort_by(|a, b| (&a.source, &a.sink, a.kind).cmp(&(&b.source, &b.sink, b.kind)));

    let activity = simulate_activity(&g, power.mc_cycles, power.seed);
    let loads = node_loads(&g, lib, timing)?;
    let mut leakage = 0.0;
    let mut terms = Vec::new();
    for (i, (node, cell)) in g.nodes.iter().zip(&mapped.cells).enumerate() {
        let e_int = match cell {
            Some(c) => {
                let cell = lib.cell(c)?;
                leakage += cell.leakage_uw;
                lib.internal_energy(cell)
            }
            None if node.kind == SogKind::Pi => 0.0,
            None => continue,
        };
        terms.push((activity.alpha[i], e_int, loads[i]));
    }
    let freq = power.freq_ghz.unwrap_or(1.0 / t);

    Ok(GoldenLabels {
        wns_ns: result.wns_r,
        tns_ns: result.tns_r,
        power_uw: power_uw(terms, leakage, power.vdd_v, freq),
        area_comb: mapped.area_comb(lib)?,
        area_seq: mapped.area_seq(lib)?,
        paths,
        nodes_before: lowered.len(),
        nodes_after: g.len(),
    })
}
