// SPDX-License-Identifier: Apache-2.0

//! Reference computations that share no code with the library under test:
//! brute-force path enumeration, truth-table probability weighting and a
//! plain recursive gate evaluator.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sog_ppa::sog::{SogBuilder, SogGraph, SogKind};

const GATES: [SogKind; 5] = [
    SogKind::Not,
    SogKind::And2,
    SogKind::Or2,
    SogKind::Xor2,
    SogKind::Mux2,
];

pub struct RandomDag {
    pub graph: SogGraph,
    pub delays: Vec<f64>,
}

/// Path count per endpoint above which a DAG is redrawn.
const MAX_PATHS: u64 = 200_000;

fn build_dag(rng: &mut ChaCha8Rng, max_nodes: usize) -> RandomDag {
    let mut b = SogBuilder::default();
    for i in 0..rng.gen_range(1..=6) {
        b.push(SogKind::Pi, vec![], Some(format!("i[{i}]")));
    }
    let ffs: Vec<u32> = (0..rng.gen_range(0..=4))
        .map(|i| b.push(SogKind::Dff, vec![u32::MAX], Some(format!("r[{i}]"))))
        .collect();
    if rng.gen_bool(0.3) {
        b.constant(rng.gen());
    }
    let n_po = rng.gen_range(1..=4);
    let room = max_nodes - b.nodes.len() - n_po;
    for _ in 0..rng.gen_range(1..=room) {
        let kind = GATES[rng.gen_range(0..GATES.len())];
        let n = b.nodes.len() as u32;
        let fanin = (0..kind.arity()).map(|_| rng.gen_range(0..n)).collect();
        b.push(kind, fanin, None);
    }
    let n = b.nodes.len() as u32;
    for &r in &ffs {
        b.nodes[r as usize].fanin[0] = rng.gen_range(0..n);
    }
    for i in 0..n_po {
        let src = rng.gen_range(0..n);
        b.push(SogKind::Po, vec![src], Some(format!("o[{i}]")));
    }
    let graph = b.finish("dag".into(), 1.0);
    graph.validate().expect("random DAG is well formed");
    let delays = (0..graph.len()).map(|_| rng.gen_range(0.01..0.2)).collect();
    RandomDag { graph, delays }
}

fn path_counts(g: &SogGraph) -> Vec<u64> {
    let mut count = vec![0u64; g.len()];
    for id in g.topo_order().unwrap() {
        let n = &g.nodes[id as usize];
        count[id as usize] = match n.kind {
            SogKind::Pi | SogKind::Dff | SogKind::Const0 | SogKind::Const1 => 1,
            _ => n.fanin.iter().map(|&f| count[f as usize]).fold(0u64, u64::saturating_add),
        };
    }
    count
}

/// Random annotated DAG with at most `max_nodes` nodes whose endpoints have
/// few enough paths to enumerate.
pub fn random_dag(seed: u64, max_nodes: usize) -> RandomDag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let d = build_dag(&mut rng, max_nodes);
        let counts = path_counts(&d.graph);
        let ok = d.graph.nodes.iter().enumerate().all(|(i, n)| match n.kind {
            SogKind::Po => counts[i] <= MAX_PATHS,
            SogKind::Dff => counts[n.fanin[0] as usize] <= MAX_PATHS,
            _ => true,
        });
        if ok {
            return d;
        }
    }
}

fn walk(g: &SogGraph, delays: &[f64], node: u32, acc: f64, best: &mut f64, paths: &mut u64) {
    let n = &g.nodes[node as usize];
    match n.kind {
        SogKind::Pi | SogKind::Const0 | SogKind::Const1 => {
            *best = best.max(acc);
            *paths += 1;
        }
        SogKind::Dff => {
            *best = best.max(acc + delays[node as usize]);
            *paths += 1;
        }
        _ => {
            for &f in &n.fanin {
                walk(g, delays, f, acc + delays[node as usize], best, paths);
            }
        }
    }
}

/// Largest arrival over every launch-to-endpoint path, by explicit
/// enumeration. A register endpoint is reached through its data input.
pub fn enumerated_arrival(g: &SogGraph, delays: &[f64], endpoint: u32) -> (f64, u64) {
    let n = &g.nodes[endpoint as usize];
    let start = if n.kind == SogKind::Dff { n.fanin[0] } else { endpoint };
    let mut best = f64::NEG_INFINITY;
    let mut paths = 0;
    walk(g, delays, start, 0.0, &mut best, &mut paths);
    (best, paths)
}

fn build_tree(b: &mut SogBuilder, rng: &mut ChaCha8Rng, leaves: &mut Vec<u32>, k: usize) -> u32 {
    let node = if k == 1 {
        leaves.pop().unwrap()
    } else if k >= 3 && rng.gen_bool(0.3) {
        let a = rng.gen_range(1..=k - 2);
        let c = rng.gen_range(1..=k - a - 1);
        let s = build_tree(b, rng, leaves, a);
        let x = build_tree(b, rng, leaves, c);
        let y = build_tree(b, rng, leaves, k - a - c);
        b.push(SogKind::Mux2, vec![s, x, y], None)
    } else {
        let kind = [SogKind::And2, SogKind::Or2, SogKind::Xor2][rng.gen_range(0..3)];
        let a = rng.gen_range(1..k);
        let l = build_tree(b, rng, leaves, a);
        let r = build_tree(b, rng, leaves, k - a);
        b.push(kind, vec![l, r], None)
    };
    if rng.gen_bool(0.2) {
        b.push(SogKind::Not, vec![node], None)
    } else {
        node
    }
}

/// Fanout-free cone over 2..=`max_inputs` distinct inputs.
pub fn random_tree_cone(seed: u64, max_inputs: usize) -> SogGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..=max_inputs);
    let mut b = SogBuilder::default();
    let mut leaves: Vec<u32> = (0..k)
        .map(|i| b.push(SogKind::Pi, vec![], Some(format!("x[{i}]"))))
        .collect();
    let root = build_tree(&mut b, &mut rng, &mut leaves, k);
    b.push(SogKind::Po, vec![root], Some("y[0]".into()));
    b.finish("cone".into(), 1.0)
}

fn eval(g: &SogGraph, node: u32, inputs: &[(u32, bool)], memo: &mut [Option<bool>]) -> bool {
    if let Some(v) = memo[node as usize] {
        return v;
    }
    let n = &g.nodes[node as usize];
    let mut f = |i: usize| eval(g, n.fanin[i], inputs, memo);
    let v = match n.kind {
        SogKind::Pi => inputs.iter().find(|(id, _)| *id == node).unwrap().1,
        SogKind::Const0 => false,
        SogKind::Const1 => true,
        SogKind::Dff => panic!("combinational cones only"),
        SogKind::Po => f(0),
        SogKind::Not => !f(0),
        SogKind::And2 => f(0) & f(1),
        SogKind::Or2 => f(0) | f(1),
        SogKind::Xor2 => f(0) ^ f(1),
        SogKind::Mux2 => {
            if f(0) {
                f(1)
            } else {
                f(2)
            }
        }
    };
    memo[node as usize] = Some(v);
    v
}

/// Probability of each node being 1 when every input is independently 1
/// with probability `p`, by weighting the full truth table.
pub fn enumerated_probabilities(g: &SogGraph, p: f64) -> Vec<f64> {
    let n_in = g.inputs.len();
    let mut prob = vec![0.0; g.len()];
    for x in 0..1u64 << n_in {
        let assign: Vec<(u32, bool)> = g
            .inputs
            .iter()
            .enumerate()
            .map(|(k, &id)| (id, (x >> k) & 1 == 1))
            .collect();
        let w: f64 = assign.iter().map(|&(_, v)| if v { p } else { 1.0 - p }).product();
        let mut memo = vec![None; g.len()];
        for id in 0..g.len() as u32 {
            if eval(g, id, &assign, &mut memo) {
                prob[id as usize] += w;
            }
        }
    }
    prob
}
