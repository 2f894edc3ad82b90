// SPDX-License-Identifier: Apache-2.0

//! Bit-blasting of word-level designs.

use crate::frontend::{NodeParams, WordDesign, WordKind, WordNode};

use super::{SogBuilder, SogGraph, SogKind};

/// Lower `design` to a pruned SOG.
///
/// Adders are ripple-carry with a half adder in bit 0; the carry out of the
/// top bit is never built. Subtraction is `a + !b + 1`. EQ is a balanced OR
/// tree over per-bit XORs followed by NOT; LT is a borrow chain.
pub fn lower(design: &WordDesign) -> SogGraph {
    let mut b = SogBuilder::default();
    let mut bits: Vec<Vec<u32>> = vec![Vec::new(); design.signals().len()];

    for port in design.inputs() {
        let sig = design.signal(port);
        bits[port.index()] = (0..sig.width)
            .map(|i| b.push(SogKind::Pi, Vec::new(), Some(format!("{}[{i}]", sig.name))))
            .collect();
    }
    // Register outputs exist before their data cones; data pins are patched below.
    let regs: Vec<&WordNode> = design.registers().collect();
    for reg in &regs {
        let sig = design.signal(reg.output);
        bits[reg.output.index()] = (0..sig.width)
            .map(|i| b.push(SogKind::Dff, vec![u32::MAX], Some(format!("{}[{i}]", sig.name))))
            .collect();
    }
    for &idx in design.comb_order() {
        let node = &design.nodes()[idx];
        let width = design.signal(node.output).width as usize;
        let out = lower_node(&mut b, node, &bits, width);
        debug_assert_eq!(out.len(), width);
        bits[node.output.index()] = out;
    }
    for reg in &regs {
        let q = bits[reg.output.index()].clone();
        let d = bits[reg.inputs[0].index()].clone();
        let enable = match reg.params {
            NodeParams::Reg { enable: Some(e) } => Some(bits[e.index()][0]),
            _ => None,
        };
        for (&qi, &di) in q.iter().zip(&d) {
            let data = match enable {
                Some(e) => b.push(SogKind::Mux2, vec![e, di, qi], None),
                None => di,
            };
            b.nodes[qi as usize].fanin[0] = data;
        }
    }
    for port in design.outputs() {
        let sig = design.signal(port);
        for (i, &src) in bits[port.index()].clone().iter().enumerate() {
            b.push(SogKind::Po, vec![src], Some(format!("{}[{i}]", sig.name)));
        }
    }
    b.finish(design.name().to_string(), design.clock_period_ns())
        .prune()
}

fn lower_node(b: &mut SogBuilder, node: &WordNode, bits: &[Vec<u32>], width: usize) -> Vec<u32> {
    let arg = |i: usize| bits[node.inputs[i].index()].clone();
    // operand bit i, zero-extended
    let ext = |b: &mut SogBuilder, v: &[u32], i: usize| match v.get(i) {
        Some(&x) => x,
        None => b.constant(false),
    };
    match node.kind {
        WordKind::Const => {
            let value = match &node.params {
                NodeParams::Const { value } => value.clone(),
                _ => unreachable!("validated CONST params"),
            };
            (0..width).map(|i| b.constant(value.bit(i as u64))).collect()
        }
        WordKind::Not => arg(0)
            .into_iter()
            .map(|x| b.push(SogKind::Not, vec![x], None))
            .collect(),
        WordKind::And | WordKind::Or | WordKind::Xor => {
            let kind = match node.kind {
                WordKind::And => SogKind::And2,
                WordKind::Or => SogKind::Or2,
                _ => SogKind::Xor2,
            };
            arg(0)
                .into_iter()
                .zip(arg(1))
                .map(|(x, y)| b.push(kind, vec![x, y], None))
                .collect()
        }
        WordKind::Mux => {
            let sel = arg(0)[0];
            arg(1)
                .into_iter()
                .zip(arg(2))
                .map(|(t, e)| b.push(SogKind::Mux2, vec![sel, t, e], None))
                .collect()
        }
        WordKind::Add | WordKind::Sub => {
            let (a, y) = (arg(0), arg(1));
            let sub = node.kind == WordKind::Sub;
            let mut out = Vec::with_capacity(width);
            let mut carry = None;
            for i in 0..width {
                let ai = ext(b, &a, i);
                let mut bi = ext(b, &y, i);
                if sub {
                    bi = b.push(SogKind::Not, vec![bi], None);
                }
                let p = b.push(SogKind::Xor2, vec![ai, bi], None);
                let last = i + 1 == width;
                match carry {
                    // bit 0: carry-in is 0 (ADD) or 1 (SUB)
                    None if !sub => {
                        out.push(p);
                        if !last {
                            carry = Some(b.push(SogKind::And2, vec![ai, bi], None));
                        }
                    }
                    None => {
                        out.push(b.push(SogKind::Not, vec![p], None));
                        if !last {
                            carry = Some(b.push(SogKind::Or2, vec![ai, bi], None));
                        }
                    }
                    Some(c) => {
                        out.push(b.push(SogKind::Xor2, vec![p, c], None));
                        if !last {
                            let g = b.push(SogKind::And2, vec![ai, bi], None);
                            let t = b.push(SogKind::And2, vec![c, p], None);
                            carry = Some(b.push(SogKind::Or2, vec![g, t], None));
                        }
                    }
                }
            }
            out
        }
        WordKind::Eq => {
            let diffs: Vec<u32> = arg(0)
                .into_iter()
                .zip(arg(1))
                .map(|(x, y)| b.push(SogKind::Xor2, vec![x, y], None))
                .collect();
            let any = reduce(b, SogKind::Or2, diffs);
            vec![b.push(SogKind::Not, vec![any], None)]
        }
        WordKind::Lt => {
            let mut borrow: Option<u32> = None;
            for (x, y) in arg(0).into_iter().zip(arg(1)) {
                let nx = b.push(SogKind::Not, vec![x], None);
                let lt = b.push(SogKind::And2, vec![nx, y], None);
                borrow = Some(match borrow {
                    None => lt,
                    Some(br) => {
                        let d = b.push(SogKind::Xor2, vec![x, y], None);
                        let same = b.push(SogKind::Not, vec![d], None);
                        let keep = b.push(SogKind::And2, vec![same, br], None);
                        b.push(SogKind::Or2, vec![lt, keep], None)
                    }
                });
            }
            vec![borrow.expect("LT operands are at least one bit")]
        }
        WordKind::Shl | WordKind::Shr => {
            let amount = match node.params {
                NodeParams::Shift { amount } => amount as usize,
                _ => unreachable!("validated shift params"),
            };
            let a = arg(0);
            (0..width)
                .map(|i| {
                    let src = if node.kind == WordKind::Shl {
                        i.checked_sub(amount)
                    } else {
                        Some(i + amount)
                    };
                    match src.and_then(|s| a.get(s)) {
                        Some(&x) => x,
                        None => b.constant(false),
                    }
                })
                .collect()
        }
        WordKind::Concat => node
            .inputs
            .iter()
            .rev()
            .flat_map(|s| bits[s.index()].iter().copied())
            .collect(),
        WordKind::Slice => {
            let lo = match node.params {
                NodeParams::Slice { lo, .. } => lo as usize,
                _ => unreachable!("validated slice params"),
            };
            arg(0)[lo..lo + width].to_vec()
        }
        WordKind::RedOr => vec![reduce(b, SogKind::Or2, arg(0))],
        WordKind::RedAnd => vec![reduce(b, SogKind::And2, arg(0))],
        WordKind::RedXor => vec![reduce(b, SogKind::Xor2, arg(0))],
        WordKind::Reg => unreachable!("registers are lowered separately"),
    }
}

/// Balanced binary reduction; an odd element is carried to the next level.
fn reduce(b: &mut SogBuilder, kind: SogKind, mut level: Vec<u32>) -> u32 {
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|c| match *c {
                [x, y] => b.push(kind, vec![x, y], None),
                [x] => x,
                _ => unreachable!(),
            })
            .collect();
    }
    level[0]
}
