// SPDX-License-Identifier: Apache-2.0

//! Cycle-accurate two-valued simulation of word-level designs using plain
//! integer arithmetic. This is the functional reference the bit-level
//! lowering is checked against.

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use super::{bits_value, mask, value_bits, NodeParams, SignalId, WordDesign, WordKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("cycle count must be at least 1")]
    NoCycles,
    #[error("stimulus has {got} cycles, {expected} requested")]
    StimulusLength { expected: usize, got: usize },
    #[error("cycle {cycle}: stimulus has {got} input bits, design has {expected}")]
    StimulusWidth {
        cycle: usize,
        expected: usize,
        got: usize,
    },
}

/// Simulate `n_cycles` cycles. Each stimulus row is the flat input bit vector
/// (input ports in declaration order, LSB first); each result row is the flat
/// output vector observed before that cycle's clock edge.
pub fn simulate_word(
    design: &WordDesign,
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
    WordSimulator::new(design).run(&stimulus[..n_cycles])
}

/// Reusable simulator with precomputed masks and port layout.
pub struct WordSimulator<'a> {
    design: &'a WordDesign,
    masks: Vec<BigUint>,
    inputs: Vec<SignalId>,
    outputs: Vec<SignalId>,
    regs: Vec<usize>,
    narrow: bool,
}

impl<'a> WordSimulator<'a> {
    pub fn new(design: &'a WordDesign) -> Self {
        let masks = design.signals().iter().map(|s| mask(s.width)).collect();
        let regs = design
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == WordKind::Reg)
            .map(|(i, _)| i)
            .collect();
        WordSimulator {
            design,
            masks,
            inputs: design.inputs().collect(),
            outputs: design.outputs().collect(),
            regs,
            narrow: design.signals().iter().all(|s| s.width <= 64),
        }
    }

    pub fn run(&self, stimulus: &[Vec<bool>]) -> Result<Vec<Vec<bool>>, SimError> {
        if stimulus.is_empty() {
            return Err(SimError::NoCycles);
        }
        let n_in = self.design.input_bits();
        if let Some((cycle, row)) = stimulus.iter().enumerate().find(|(_, r)| r.len() != n_in) {
            return Err(SimError::StimulusWidth {
                cycle,
                expected: n_in,
                got: row.len(),
            });
        }
        if self.narrow {
            Ok(self.run_narrow(stimulus))
        } else {
            Ok(self.run_wide(stimulus))
        }
    }

    fn run_wide(&self, stimulus: &[Vec<bool>]) -> Vec<Vec<bool>> {
        let d = self.design;
        let mut values = vec![BigUint::zero(); d.signals().len()];
        let mut out = Vec::with_capacity(stimulus.len());
        for row in stimulus {
            let mut at = 0;
            for &port in &self.inputs {
                let w = d.signal(port).width as usize;
                values[port.index()] = bits_value(&row[at..at + w]);
                at += w;
            }
            for &idx in d.comb_order() {
                let v = self.eval(idx, &values);
                values[d.nodes()[idx].output.index()] = v;
            }
            let mut bits = Vec::with_capacity(d.output_bits());
            for &port in &self.outputs {
                bits.extend(value_bits(&values[port.index()], d.signal(port).width));
            }
            out.push(bits);

            let next: Vec<BigUint> = self
                .regs
                .iter()
                .map(|&idx| {
                    let node = &d.nodes()[idx];
                    let enabled = match node.params {
                        NodeParams::Reg { enable: Some(en) } => !values[en.index()].is_zero(),
                        _ => true,
                    };
                    if enabled {
                        values[node.inputs[0].index()].clone()
                    } else {
                        values[node.output.index()].clone()
                    }
                })
                .collect();
            for (&idx, v) in self.regs.iter().zip(next) {
                values[d.nodes()[idx].output.index()] = v;
            }
        }
        out
    }

    /// Same semantics as [`Self::run_wide`] on plain `u64` words.
    fn run_narrow(&self, stimulus: &[Vec<bool>]) -> Vec<Vec<bool>> {
        let d = self.design;
        let width = |s: SignalId| d.signal(s).width;
        let mut values = vec![0u64; d.signals().len()];
        let mut out = Vec::with_capacity(stimulus.len());
        for row in stimulus {
            let mut at = 0;
            for &port in &self.inputs {
                let w = width(port) as usize;
                values[port.index()] = row[at..at + w]
                    .iter()
                    .rev()
                    .fold(0u64, |acc, &b| (acc << 1) | b as u64);
                at += w;
            }
            for &idx in d.comb_order() {
                let node = &d.nodes()[idx];
                values[node.output.index()] = self.eval_narrow(node, &values);
            }
            let mut bits = Vec::with_capacity(d.output_bits());
            for &port in &self.outputs {
                let v = values[port.index()];
                bits.extend((0..width(port)).map(|i| (v >> i) & 1 == 1));
            }
            out.push(bits);
            let next: Vec<u64> = self
                .regs
                .iter()
                .map(|&idx| {
                    let node = &d.nodes()[idx];
                    let enabled = match node.params {
                        NodeParams::Reg { enable: Some(en) } => values[en.index()] != 0,
                        _ => true,
                    };
                    values[if enabled { node.inputs[0] } else { node.output }.index()]
                })
                .collect();
            for (&idx, v) in self.regs.iter().zip(next) {
                values[d.nodes()[idx].output.index()] = v;
            }
        }
        out
    }

    fn eval_narrow(&self, node: &super::WordNode, values: &[u64]) -> u64 {
        let d = self.design;
        let arg = |i: usize| values[node.inputs[i].index()];
        let m = narrow_mask(d.signal(node.output).width);
        match node.kind {
            WordKind::Const => match &node.params {
                NodeParams::Const { value } => value.iter_u64_digits().next().unwrap_or(0),
                _ => unreachable!("validated CONST params"),
            },
            WordKind::Not => !arg(0) & m,
            WordKind::And => arg(0) & arg(1),
            WordKind::Or => arg(0) | arg(1),
            WordKind::Xor => arg(0) ^ arg(1),
            WordKind::Add => arg(0).wrapping_add(arg(1)) & m,
            WordKind::Sub => arg(0).wrapping_sub(arg(1)) & m,
            WordKind::Mux => {
                if arg(0) != 0 {
                    arg(1)
                } else {
                    arg(2)
                }
            }
            WordKind::Eq => (arg(0) == arg(1)) as u64,
            WordKind::Lt => (arg(0) < arg(1)) as u64,
            WordKind::Shl => match node.params {
                NodeParams::Shift { amount } => arg(0).checked_shl(amount).unwrap_or(0) & m,
                _ => unreachable!("validated shift params"),
            },
            WordKind::Shr => match node.params {
                NodeParams::Shift { amount } => arg(0).checked_shr(amount).unwrap_or(0),
                _ => unreachable!("validated shift params"),
            },
            WordKind::Concat => node.inputs.iter().fold(0u64, |acc, &s| {
                acc.checked_shl(d.signal(s).width).unwrap_or(0) | values[s.index()]
            }),
            WordKind::Slice => match node.params {
                NodeParams::Slice { lo, .. } => arg(0).checked_shr(lo).unwrap_or(0) & m,
                _ => unreachable!("validated slice params"),
            },
            WordKind::RedOr => (arg(0) != 0) as u64,
            WordKind::RedAnd => (arg(0) == narrow_mask(d.signal(node.inputs[0]).width)) as u64,
            WordKind::RedXor => (arg(0).count_ones() % 2) as u64,
            WordKind::Reg => unreachable!("registers are not combinational"),
        }
    }

    fn eval(&self, idx: usize, values: &[BigUint]) -> BigUint {
        let node = &self.design.nodes()[idx];
        let arg = |i: usize| &values[node.inputs[i].index()];
        let out_mask = &self.masks[node.output.index()];
        let bool_val = |b: bool| if b { BigUint::from(1u8) } else { BigUint::zero() };
        match node.kind {
            WordKind::Const => match &node.params {
                NodeParams::Const { value } => value.clone(),
                _ => unreachable!("validated CONST params"),
            },
            WordKind::Not => arg(0) ^ out_mask,
            WordKind::And => arg(0) & arg(1),
            WordKind::Or => arg(0) | arg(1),
            WordKind::Xor => arg(0) ^ arg(1),
            WordKind::Add => (arg(0) + arg(1)) & out_mask,
            WordKind::Sub => (arg(0) + out_mask + 1u8 - arg(1)) & out_mask,
            WordKind::Mux => {
                if arg(0).is_zero() {
                    arg(2).clone()
                } else {
                    arg(1).clone()
                }
            }
            WordKind::Eq => bool_val(arg(0) == arg(1)),
            WordKind::Lt => bool_val(arg(0) < arg(1)),
            WordKind::Shl => match node.params {
                NodeParams::Shift { amount } => (arg(0) << amount as usize) & out_mask,
                _ => unreachable!("validated shift params"),
            },
            WordKind::Shr => match node.params {
                NodeParams::Shift { amount } => arg(0) >> amount as usize,
                _ => unreachable!("validated shift params"),
            },
            WordKind::Concat => {
                let mut acc = BigUint::zero();
                for &s in &node.inputs {
                    acc = (acc << self.design.signal(s).width as usize) | &values[s.index()];
                }
                acc
            }
            WordKind::Slice => match node.params {
                NodeParams::Slice { lo, .. } => (arg(0) >> lo as usize) & out_mask,
                _ => unreachable!("validated slice params"),
            },
            WordKind::RedOr => bool_val(!arg(0).is_zero()),
            WordKind::RedAnd => bool_val(*arg(0) == self.masks[node.inputs[0].index()]),
            WordKind::RedXor => bool_val(arg(0).count_ones() % 2 == 1),
            WordKind::Reg => unreachable!("registers are not combinational"),
        }
    }
}

fn narrow_mask(width: u32) -> u64 {
    u64::MAX >> (64 - width.min(64))
}
