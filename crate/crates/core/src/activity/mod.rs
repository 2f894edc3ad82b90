// SPDX-License-Identifier: Apache-2.0

//! Signal probabilities and toggle rates.
//!
//! [`propagate`] assumes spatially independent signals and a memoryless
//! toggle model (`alpha = 2p(1-p)`). Register loops are solved by fixed-point
//! iteration over the DFF probabilities, finishing with Newton steps.
//! [`simulate_activity`] is the Monte-Carlo counterpart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sog::{SogDoc, SogGraph, SogKind, SogSimulator};

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActivityError {
    #[error("register probabilities did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivityMap {
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl ActivityMap {
    fn from_p(p: Vec<f64>) -> Self {
        let alpha = p.iter().map(|&x| 2.0 * x * (1.0 - x)).collect();
        ActivityMap { p, alpha }
    }

    /// Copy `p`/`alpha` into the per-node fields of a SOG document.
    pub fn attach(&self, doc: &mut SogDoc) {
        for (node, (&p, &a)) in doc.nodes.iter_mut().zip(self.p.iter().zip(&self.alpha)) {
            node.p = Some(p);
            node.alpha = Some(a);
        }
    }
}

/// One combinational sweep given current DFF probabilities.
fn sweep(graph: &SogGraph, order: &[u32], p: &mut [f64]) {
    for &id in order {
        let n = &graph.nodes[id as usize];
        let f = |i: usize| p[n.fanin[i] as usize];
        p[id as usize] = match n.kind {
            SogKind::Pi | SogKind::Dff => continue,
            SogKind::Const0 => 0.0,
            SogKind::Const1 => 1.0,
            SogKind::Po => f(0),
            SogKind::Not => 1.0 - f(0),
            SogKind::And2 => f(0) * f(1),
            SogKind::Or2 => f(0) + f(1) - f(0) * f(1),
            SogKind::Xor2 => f(0) + f(1) - 2.0 * f(0) * f(1),
            SogKind::Mux2 => f(0) * f(1) + (1.0 - f(0)) * f(2),
        };
    }
}

/// Forward-mode derivative of every node w.r.t. register `j`, at the
/// probabilities in `p`.
fn tangent(graph: &SogGraph, order: &[u32], p: &[f64], j: u32, dp: &mut [f64]) {
    dp.iter_mut().for_each(|x| *x = 0.0);
    dp[j as usize] = 1.0;
    for &id in order {
        let n = &graph.nodes[id as usize];
        let v = |i: usize| p[n.fanin[i] as usize];
        let d = |i: usize| dp[n.fanin[i] as usize];
        dp[id as usize] = match n.kind {
            SogKind::Pi | SogKind::Dff => continue,
            SogKind::Const0 | SogKind::Const1 => 0.0,
            SogKind::Po => d(0),
            SogKind::Not => -d(0),
            SogKind::And2 => d(0) * v(1) + v(0) * d(1),
            SogKind::Or2 => d(0) * (1.0 - v(1)) + (1.0 - v(0)) * d(1),
            SogKind::Xor2 => d(0) * (1.0 - 2.0 * v(1)) + (1.0 - 2.0 * v(0)) * d(1),
            SogKind::Mux2 => d(0) * (v(1) - v(2)) + v(0) * d(1) + (1.0 - v(0)) * d(2),
        };
    }
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &k| a[i][c].abs().total_cmp(&a[k][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Plain sweeps before switching to Newton steps on `F(q) - q`.
const PLAIN_SWEEPS: usize = 8;
/// Diagonal shift keeping `I - J` invertible along neutral directions.
const RIDGE: f64 = 1e-10;

fn newton_step(graph: &SogGraph, order: &[u32], p: &[f64], q: &[f64], nq: &[f64]) -> Option<Vec<f64>> {
    let regs = &graph.registers;
    let n = regs.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut dp = vec![0.0; p.len()];
    for (j, &r) in regs.iter().enumerate() {
        tangent(graph, order, p, r, &mut dp);
        for (i, &ri) in regs.iter().enumerate() {
            a[i][j] = -dp[graph.nodes[ri as usize].fanin[0] as usize];
        }
        a[j][j] += 1.0 + RIDGE;
    }
    let b: Vec<f64> = nq.iter().zip(q).map(|(f, x)| f - x).collect();
    let dx = solve(a, b)?;
    Some(q.iter().zip(dx).map(|(x, d)| (x + d).clamp(0.0, 1.0)).collect())
}

pub fn propagate(graph: &SogGraph, input_p: f64) -> Result<ActivityMap, ActivityError> {
    let order = graph.topo_order().expect("SOG is acyclic");
    let mut p = vec![0.5; graph.len()];
    for &pi in &graph.inputs {
        p[pi as usize] = input_p;
    }
    let regs = &graph.registers;
    let mut residual = 0.0;
    for it in 0..MAX_ITERATIONS {
        sweep(graph, &order, &mut p);
        let q: Vec<f64> = regs.iter().map(|&r| p[r as usize]).collect();
        let nq: Vec<f64> = regs
            .iter()
            .map(|&r| p[graph.nodes[r as usize].fanin[0] as usize])
            .collect();
        residual = q
            .iter()
            .zip(&nq)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual < TOLERANCE {
            return Ok(ActivityMap::from_p(p));
        }
        let update = if it < PLAIN_SWEEPS {
            None
        } else {
            newton_step(graph, &order, &p, &q, &nq)
        };
        for (&r, u) in regs.iter().zip(update.unwrap_or(nq)) {
            p[r as usize] = u;
        }
    }
    Err(ActivityError::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Monte-Carlo activity: inputs are independent fair coins each cycle,
/// DFFs start at 0. `p` is the fraction of cycles a node is 1, `alpha` the
/// fraction of cycle boundaries where it changes.
pub fn simulate_activity(graph: &SogGraph, n_cycles: usize, seed: u64) -> ActivityMap {
    let sim = SogSimulator::new(graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.len();
    let mut v = vec![0u64; n];
    let mut prev = vec![0u64; n];
    let mut ones = vec![0u64; n];
    let mut toggles = vec![0u64; n];
    for cycle in 0..n_cycles {
        for &pi in &graph.inputs {
            v[pi as usize] = if rng.gen::<bool>() { u64::MAX } else { 0 };
        }
        sim.settle(&mut v);
        for i in 0..n {
            let bit = v[i] & 1;
            ones[i] += bit;
            if cycle > 0 && bit != prev[i] {
                toggles[i] += 1;
            }
            prev[i] = bit;
        }
        sim.clock(&mut v);
    }
    let boundaries = n_cycles.saturating_sub(1).max(1) as f64;
    ActivityMap {
        p: ones.iter().map(|&c| c as f64 / n_cycles.max(1) as f64).collect(),
        alpha: toggles.iter().map(|&t| t as f64 / boundaries).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{generate_design, GenParams};
    use crate::sog::{lower, SogBuilder};

    fn two_input(kind: SogKind) -> SogGraph {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        let c = b.push(SogKind::Pi, vec![], Some("b[0]".into()));
        let x = b.push(kind, vec![a, c], None);
        b.push(SogKind::Po, vec![x], Some("y[0]".into()));
        b.finish("g".into(), 1.0)
    }

    #[test]
    fn and_and_xor_formulas() {
        let m = propagate(&two_input(SogKind::And2), 0.5).unwrap();
        assert_eq!(m.p[2], 0.25);
        assert_eq!(m.alpha[2], 0.375);
        let m = propagate(&two_input(SogKind::Xor2), 0.5).unwrap();
        assert_eq!(m.p[2], 0.5);
        assert_eq!(m.alpha[2], 0.5);
    }

    #[test]
    fn constant_never_toggles() {
        let mut b = SogBuilder::default();
        let one = b.constant(true);
        b.push(SogKind::Po, vec![one], Some("y[0]".into()));
        let g = b.finish("c".into(), 1.0);
        assert_eq!(simulate_activity(&g, 100, 1).alpha[0], 0.0);
        assert_eq!(propagate(&g, 0.5).unwrap().alpha[0], 0.0);
    }

    #[test]
    fn single_input_toggle_rate() {
        let mut b = SogBuilder::default();
        let a = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        b.push(SogKind::Po, vec![a], Some("y[0]".into()));
        let g = b.finish("pi".into(), 1.0);
        let alpha = simulate_activity(&g, 10_000, 42).alpha[0];
        assert!((alpha - 0.5).abs() < 0.03);
        assert_eq!(alpha, 4999.0 / 9999.0);
    }

    #[test]
    fn enable_loop_converges() {
        // q' = e ? d : q with small enable probability
        let mut b = SogBuilder::default();
        let d = b.push(SogKind::Pi, vec![], Some("d[0]".into()));
        let e0 = b.push(SogKind::Pi, vec![], Some("e[0]".into()));
        let e1 = b.push(SogKind::Pi, vec![], Some("e[1]".into()));
        let e = b.push(SogKind::And2, vec![e0, e1], None);
        let one = b.constant(true);
        let dd = b.push(SogKind::And2, vec![d, one], None);
        let q = b.push(SogKind::Dff, vec![u32::MAX], Some("q[0]".into()));
        let m = b.push(SogKind::Mux2, vec![e, dd, q], None);
        b.nodes[q as usize].fanin[0] = m;
        b.push(SogKind::Po, vec![q], Some("y[0]".into()));
        let g = b.finish("en".into(), 1.0);
        let map = propagate(&g, 0.2).unwrap();
        assert!((map.p[q as usize] - 0.2).abs() < 1e-9);
    }

    #[test]
    fn sticky_bit_reaches_one() {
        // q' = q | (a0 & ... & a19); plain iteration would need ~1e6 sweeps
        let mut b = SogBuilder::default();
        let mut hit = b.push(SogKind::Pi, vec![], Some("a[0]".into()));
        for i in 1..20 {
            let a = b.push(SogKind::Pi, vec![], Some(format!("a[{i}]")));
            hit = b.push(SogKind::And2, vec![hit, a], None);
        }
        let q = b.push(SogKind::Dff, vec![u32::MAX], Some("q[0]".into()));
        let next = b.push(SogKind::Or2, vec![q, hit], None);
        b.nodes[q as usize].fanin[0] = next;
        b.push(SogKind::Po, vec![q], Some("y[0]".into()));
        let g = b.finish("sticky".into(), 1.0);
        let map = propagate(&g, 0.5).unwrap();
        assert!((map.p[q as usize] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn generated_designs_converge_within_bounds() {
        for seed in 0..20 {
            let g = lower(
                &generate_design(&GenParams {
                    seed,
                    n_stages: 3,
                    ..GenParams::default()
                })
                .unwrap(),
            );
            let m = propagate(&g, 0.5).unwrap();
            for (&p, &a) in m.p.iter().zip(&m.alpha) {
                assert!((0.0..=1.0).contains(&p));
                assert!((0.0..=0.5).contains(&a));
                assert_eq!(a, 2.0 * p * (1.0 - p));
            }
        }
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let g = lower(&generate_design(&GenParams::default()).unwrap());
        assert_eq!(simulate_activity(&g, 500, 9), simulate_activity(&g, 500, 9));
        assert_ne!(simulate_activity(&g, 500, 9), simulate_activity(&g, 500, 10));
    }
}
