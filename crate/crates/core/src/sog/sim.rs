// SPDX-License-Identifier: Apache-2.0

//! Bit-parallel SOG simulation (64 independent runs per `u64` lane) and
//! equivalence checking against the word-level simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frontend::{SimError, WordDesign, WordSimulator};

use super::{SogGraph, SogKind};

/// Precomputed evaluation order for repeated simulation.
pub struct SogSimulator<'a> {
    graph: &'a SogGraph,
    order: Vec<u32>,
}

impl<'a> SogSimulator<'a> {
    pub fn new(graph: &'a SogGraph) -> Self {
        let order = graph
            .topo_order()
            .expect("SOG is acyclic")
            .into_iter()
            .filter(|&id| !matches!(graph.kind(id), SogKind::Pi | SogKind::Dff))
            .collect();
        SogSimulator { graph, order }
    }

    /// Simulate 64 runs in parallel. `stimulus[c][k]` holds the lanes of input
    /// bit `k` in cycle `c`; the result holds the PO lanes per cycle, sampled
    /// before the clock edge. DFFs start at 0.
    pub fn run_lanes(&self, stimulus: &[Vec<u64>]) -> Vec<Vec<u64>> {
        let g = self.graph;
        let mut v = vec![0u64; g.len()];
        let mut out = Vec::with_capacity(stimulus.len());
        for row in stimulus {
            for (&pi, &x) in g.inputs.iter().zip(row) {
                v[pi as usize] = x;
            }
            self.settle(&mut v);
            out.push(g.outputs.iter().map(|&po| v[po as usize]).collect());
            self.clock(&mut v);
        }
        out
    }

    /// Evaluate every combinational node given PI and DFF values in `v`.
    pub fn settle(&self, v: &mut [u64]) {
        for &id in &self.order {
            let n = &self.graph.nodes[id as usize];
            let f = |i: usize| v[n.fanin[i] as usize];
            v[id as usize] = match n.kind {
                SogKind::Const0 => 0,
                SogKind::Const1 => u64::MAX,
                SogKind::Not => !f(0),
                SogKind::And2 => f(0) & f(1),
                SogKind::Or2 => f(0) | f(1),
                SogKind::Xor2 => f(0) ^ f(1),
                SogKind::Mux2 => (f(0) & f(1)) | (!f(0) & f(2)),
                SogKind::Po => f(0),
                SogKind::Pi | SogKind::Dff => unreachable!(),
            };
        }
    }

    /// Load every DFF from its data pin.
    pub fn clock(&self, v: &mut [u64]) {
        let g = self.graph;
        let next: Vec<u64> = g
            .registers
            .iter()
            .map(|&r| v[g.nodes[r as usize].fanin[0] as usize])
            .collect();
        for (&r, x) in g.registers.iter().zip(next) {
            v[r as usize] = x;
        }
    }
}

/// Single-run simulation with the same stimulus layout as the word-level simulator.
pub fn simulate_sog(
    graph: &SogGraph,
    stimulus: &[Vec<bool>],
    n_cycles: usize,
) -> Result<Vec<Vec<bool>>, SimError> {
    if n_cycles == 0 {
        return Err(SimError::NoCycles);
    }
    if stimulus.len() < n_cycles {
        return Err(SimError::StimulusLength {
            expected: n_cycles,
            got: stimulus.len(),
        });
    }
    let n_in = graph.inputs.len();
    let mut lanes = Vec::with_capacity(n_cycles);
    for (cycle, row) in stimulus[..n_cycles].iter().enumerate() {
        if row.len() != n_in {
            return Err(SimError::StimulusWidth {
                cycle,
                expected: n_in,
                got: row.len(),
            });
        }
        lanes.push(row.iter().map(|&b| b as u64).collect::<Vec<u64>>());
    }
    Ok(SogSimulator::new(graph)
        .run_lanes(&lanes)
        .into_iter()
        .map(|row| row.into_iter().map(|x| x & 1 == 1).collect())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    /// First mismatching multi-cycle stimulus found.
    Counterexample(Vec<Vec<bool>>),
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

/// Input-bit limit for exhaustive checking.
pub const EXHAUSTIVE_BITS: usize = 16;

/// Compare `graph` against `design` by simulation.
///
/// Up to [`EXHAUSTIVE_BITS`] input bits every assignment `x` is applied for
/// two cycles, once as `[x, x]` and once as `[x, !x]`. Wider designs get
/// `budget` random 4-cycle stimuli from a fixed seed.
pub fn check_equivalence(design: &WordDesign, graph: &SogGraph, budget: usize) -> Equivalence {
    let n_in = design.input_bits();
    assert_eq!(n_in, graph.inputs.len(), "graph and design disagree on inputs");
    let word = WordSimulator::new(design);
    let sog = SogSimulator::new(graph);

    let mut stimuli: Vec<Vec<Vec<bool>>> = Vec::new();
    if n_in <= EXHAUSTIVE_BITS {
        for x in 0..1u64 << n_in {
            let row: Vec<bool> = (0..n_in).map(|k| (x >> k) & 1 == 1).collect();
            let inv: Vec<bool> = row.iter().map(|b| !b).collect();
            stimuli.push(vec![row.clone(), row.clone()]);
            stimuli.push(vec![row, inv]);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e001);
        for _ in 0..budget {
            stimuli.push(
                (0..4)
                    .map(|_| (0..n_in).map(|_| rng.gen()).collect())
                    .collect(),
            );
        }
    }

    for batch in stimuli.chunks(64) {
        let n_cycles = batch[0].len();
        let lanes: Vec<Vec<u64>> = (0..n_cycles)
            .map(|c| {
                (0..n_in)
                    .map(|k| {
                        batch
                            .iter()
                            .enumerate()
                            .fold(0u64, |acc, (lane, s)| acc | (s[c][k] as u64) << lane)
                    })
                    .collect()
            })
            .collect();
        let got = sog.run_lanes(&lanes);
        for (lane, stim) in batch.iter().enumerate() {
            let expect = word.run(stim).expect("stimulus matches design inputs");
            let matches = expect.iter().zip(&got).all(|(want, row)| {
                want.iter()
                    .zip(row)
                    .all(|(&w, &x)| w == ((x >> lane) & 1 == 1))
            });
            if !matches {
                return Equivalence::Counterexample(stim.clone());
            }
        }
    }
    Equivalence::Equivalent
}
