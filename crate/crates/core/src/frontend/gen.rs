// SPDX-License-Identifier: Apache-2.0

//! Seeded random pipeline generator.
//!
//! Each stage draws `ops_per_stage` word operators over the live nets (the
//! previous register bank plus nets created earlier in the same stage); every
//! stage net nobody consumed becomes a register, and that bank is the next
//! stage's live set. The final bank drives the output ports through
//! single-input CONCATs so port and register identities stay distinct.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{NetDoc, NetlistDoc, NodeDoc, ParamsDoc, PortDoc, WordDesign, WordKind};

#[derive(Clone, Debug, PartialEq)]
pub enum ClockSpec {
    Fixed(f64),
    /// Uniform choice from the listed periods.
    Choice(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub seed: u64,
    pub n_stages: usize,
    pub width_min: u32,
    pub width_max: u32,
    pub ops_per_stage: usize,
    pub clock: ClockSpec,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            seed: 1,
            n_stages: 2,
            width_min: 2,
            width_max: 8,
            ops_per_stage: 4,
            clock: ClockSpec::Fixed(1.0),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidParams(m.to_string()));
        if self.n_stages == 0 || self.ops_per_stage == 0 {
            return bad("stage and op counts must be positive");
        }
        if self.width_min == 0 || self.width_min > self.width_max {
            return bad("need 1 <= width_min <= width_max");
        }
        let periods: &[f64] = match &self.clock {
            ClockSpec::Fixed(p) => std::slice::from_ref(p),
            ClockSpec::Choice(ps) => ps,
        };
        if periods.is_empty() || periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return bad("clock periods must be positive");
        }
        Ok(())
    }
}

/// Kinds drawn per operator slot. REG only appears at stage boundaries.
const OP_KINDS: [WordKind; 17] = [
    WordKind::Const,
    WordKind::Not,
    WordKind::And,
    WordKind::Or,
    WordKind::Xor,
    WordKind::Add,
    WordKind::Sub,
    WordKind::Mux,
    WordKind::Eq,
    WordKind::Lt,
    WordKind::Shl,
    WordKind::Shr,
    WordKind::Concat,
    WordKind::Slice,
    WordKind::RedOr,
    WordKind::RedAnd,
    WordKind::RedXor,
];

#[derive(Clone)]
struct Net {
    name: String,
    width: u32,
}

struct Builder {
    rng: ChaCha8Rng,
    params: GenParams,
    nets: Vec<NetDoc>,
    nodes: Vec<NodeDoc>,
}

impl Builder {
    fn wire(&mut self, name: String, width: u32) -> Net {
        self.nets.push(NetDoc {
            name: name.clone(),
            width,
        });
        Net { name, width }
    }

    fn node(&mut self, kind: WordKind, inputs: &[&Net], output: &Net, params: ParamsDoc) {
        self.nodes.push(NodeDoc {
            kind: kind.as_str().to_string(),
            inputs: inputs.iter().map(|n| n.name.clone()).collect(),
            output: output.name.clone(),
            params,
        });
    }

    fn random_value(&mut self, width: u32) -> BigUint {
        let digits: Vec<u32> = (0..width.div_ceil(32)).map(|_| self.rng.gen()).collect();
        BigUint::from_slice(&digits) & super::mask(width)
    }

    fn constant(&mut self, name: String, width: u32, value: BigUint) -> Net {
        let net = self.wire(name, width);
        let params = ParamsDoc {
            value: Some(value.to_str_radix(10)),
            width: Some(width),
            ..Default::default()
        };
        self.node(WordKind::Const, &[], &net, params);
        net
    }

    /// Adapt `net` to `width` by slicing low bits or zero-padding on top.
    fn fit(&mut self, net: Net, width: u32, prefix: &str, tag: &mut usize) -> Net {
        use std::cmp::Ordering;
        *tag += 1;
        match net.width.cmp(&width) {
            Ordering::Equal => net,
            Ordering::Greater => {
                let out = self.wire(format!("{prefix}_f{tag}"), width);
                let params = ParamsDoc {
                    hi: Some(width - 1),
                    lo: Some(0),
                    ..Default::default()
                };
                self.node(WordKind::Slice, &[&net], &out, params);
                out
            }
            Ordering::Less => {
                let pad = self.constant(
                    format!("{prefix}_z{tag}"),
                    width - net.width,
                    BigUint::default(),
                );
                let out = self.wire(format!("{prefix}_f{tag}"), width);
                self.node(WordKind::Concat, &[&pad, &net], &out, ParamsDoc::default());
                out
            }
        }
    }

    fn pick(&mut self, bank: &[Net], stage: &[Net]) -> Net {
        if !stage.is_empty() && (bank.is_empty() || self.rng.gen_bool(0.5)) {
            stage.choose(&mut self.rng).unwrap().clone()
        } else {
            bank.choose(&mut self.rng).unwrap().clone()
        }
    }

    /// Like [`Self::pick`] but avoiding nets named in `avoid` whenever any
    /// other candidate exists.
    fn pick_other(&mut self, bank: &[Net], stage: &[Net], avoid: &[String]) -> Net {
        let ok = |n: &&Net| !avoid.contains(&n.name);
        let bank2: Vec<Net> = bank.iter().filter(ok).cloned().collect();
        let stage2: Vec<Net> = stage.iter().filter(ok).cloned().collect();
        if bank2.is_empty() && stage2.is_empty() {
            self.pick(bank, stage)
        } else {
            self.pick(&bank2, &stage2)
        }
    }

    /// Emit one operator; returns its output net and the nets it consumed.
    fn emit(&mut self, kind: WordKind, name: String, bank: &[Net], stage: &[Net]) -> (Net, Vec<String>) {
        let wmax = self.params.width_max;
        let wmin = self.params.width_min;
        let mut tag = 0usize;
        let a = self.pick(bank, stage);
        let mut used = vec![a.name.clone()];
        let out = match kind {
            WordKind::Const => {
                let w = self.rng.gen_range(wmin..=wmax);
                let v = self.random_value(w);
                used.clear();
                return (self.constant(name, w, v), used);
            }
            WordKind::Not | WordKind::Shl | WordKind::Shr => {
                let out = self.wire(name, a.width);
                let params = if kind == WordKind::Not {
                    ParamsDoc::default()
                } else {
                    ParamsDoc {
                        amount: Some(self.rng.gen_range(0..a.width)),
                        ..Default::default()
                    }
                };
                self.node(kind, &[&a], &out, params);
                out
            }
            WordKind::And | WordKind::Or | WordKind::Xor | WordKind::Eq | WordKind::Lt => {
                let b = self.pick_other(bank, stage, &used);
                used.push(b.name.clone());
                let b = self.fit(b, a.width, &name, &mut tag);
                let w = if matches!(kind, WordKind::Eq | WordKind::Lt) { 1 } else { a.width };
                let out = self.wire(name, w);
                self.node(kind, &[&a, &b], &out, ParamsDoc::default());
                out
            }
            WordKind::Add | WordKind::Sub => {
                let b = self.pick_other(bank, stage, &used);
                used.push(b.name.clone());
                let base = a.width.max(b.width);
                let w = if base < wmax && self.rng.gen_bool(0.5) { base + 1 } else { base };
                let out = self.wire(name, w);
                self.node(kind, &[&a, &b], &out, ParamsDoc::default());
                out
            }
            WordKind::Mux => {
                let ones: Vec<Net> = bank
                    .iter()
                    .chain(stage)
                    .filter(|n| n.width == 1 && n.name != a.name)
                    .cloned()
                    .collect();
                let sel = if let Some(s) = ones.choose(&mut self.rng) {
                    s.clone()
                } else {
                    let src = self.pick(bank, stage);
                    used.push(src.name.clone());
                    let bit = self.rng.gen_range(0..src.width);
                    tag += 1;
                    let s = self.wire(format!("{name}_s{tag}"), 1);
                    let params = ParamsDoc {
                        hi: Some(bit),
                        lo: Some(bit),
                        ..Default::default()
                    };
                    self.node(WordKind::Slice, &[&src], &s, params);
                    s
                };
                used.push(sel.name.clone());
                let b = self.pick_other(bank, stage, &used);
                used.push(b.name.clone());
                let b = self.fit(b, a.width, &name, &mut tag);
                let out = self.wire(name, a.width);
                self.node(kind, &[&sel, &a, &b], &out, ParamsDoc::default());
                out
            }
            WordKind::Concat => {
                let a = if a.width >= wmax && a.width > 1 {
                    let half = (wmax / 2).max(1);
                    self.fit(a, half, &name, &mut tag)
                } else {
                    a
                };
                let b = self.pick_other(bank, stage, &used);
                used.push(b.name.clone());
                let b = self.fit(b, wmax.saturating_sub(a.width).max(1), &name, &mut tag);
                let out = self.wire(name, a.width + b.width);
                self.node(kind, &[&a, &b], &out, ParamsDoc::default());
                out
            }
            WordKind::Slice => {
                let lo = self.rng.gen_range(0..a.width);
                let hi = self.rng.gen_range(lo..a.width);
                let out = self.wire(name, hi - lo + 1);
                let params = ParamsDoc {
                    hi: Some(hi),
                    lo: Some(lo),
                    ..Default::default()
                };
                self.node(kind, &[&a], &out, params);
                out
            }
            WordKind::RedOr | WordKind::RedAnd | WordKind::RedXor => {
                let out = self.wire(name, 1);
                self.node(kind, &[&a], &out, ParamsDoc::default());
                out
            }
            WordKind::Reg => unreachable!("registers are placed at stage boundaries"),
        };
        (out, used)
    }
}

/// Generate a pipelined design. The result (and its printed document) is a
/// pure function of `params`.
pub fn generate_design(params: &GenParams) -> Result<WordDesign, GenError> {
    params.validate()?;
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        params: params.clone(),
        nets: Vec::new(),
        nodes: Vec::new(),
    };
    let clock_period_ns = match &params.clock {
        ClockSpec::Fixed(p) => *p,
        ClockSpec::Choice(ps) => *ps.choose(&mut b.rng).unwrap(),
    };

    let n_inputs = b.rng.gen_range(2..=3);
    let mut ports = Vec::new();
    let mut bank = Vec::new();
    for i in 0..n_inputs {
        let width = b.rng.gen_range(params.width_min..=params.width_max);
        let name = format!("in{i}");
        ports.push(PortDoc {
            name: name.clone(),
            dir: "input".into(),
            width,
        });
        bank.push(Net { name, width });
    }

    for s in 0..params.n_stages {
        let mut stage: Vec<Net> = Vec::new();
        let mut consumed: Vec<String> = Vec::new();
        for k in 0..params.ops_per_stage {
            let kind = *OP_KINDS.choose(&mut b.rng).unwrap();
            let (net, used) = b.emit(kind, format!("s{s}_n{k}"), &bank, &stage);
            consumed.extend(used);
            stage.push(net);
        }
        let sinks: Vec<Net> = stage
            .iter()
            .filter(|n| !consumed.contains(&n.name))
            .cloned()
            .collect();
        let enables: Vec<Net> = bank
            .iter()
            .chain(&stage)
            .filter(|n| n.width == 1)
            .cloned()
            .collect();
        let mut next_bank = Vec::with_capacity(sinks.len());
        for (j, d) in sinks.iter().enumerate() {
            let q = b.wire(format!("r{s}_{j}"), d.width);
            let enable = if !enables.is_empty() && b.rng.gen_bool(0.2) {
                enables.choose(&mut b.rng).map(|n| n.name.clone())
            } else {
                None
            };
            let p = ParamsDoc {
                enable,
                ..Default::default()
            };
            b.node(WordKind::Reg, &[d], &q, p);
            next_bank.push(q);
        }
        bank = next_bank;
    }

    for (j, q) in bank.iter().enumerate() {
        let name = format!("out{j}");
        ports.push(PortDoc {
            name: name.clone(),
            dir: "output".into(),
            width: q.width,
        });
        let out = Net {
            name,
            width: q.width,
        };
        b.node(WordKind::Concat, &[q], &out, ParamsDoc::default());
    }

    let doc = NetlistDoc {
        name: format!("gen_{:016x}", params.seed),
        clock_period_ns,
        ports,
        nets: b.nets,
        nodes: b.nodes,
    };
    Ok(WordDesign::from_doc(&doc).expect("generator emits valid netlists"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::simulate_word;

    fn params(seed: u64, n_stages: usize, ops: usize) -> GenParams {
        GenParams {
            seed,
            n_stages,
            ops_per_stage: ops,
            ..GenParams::default()
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_design(&params(1, 1, 1)).unwrap().to_json();
        let b = generate_design(&params(1, 1, 1)).unwrap().to_json();
        assert_eq!(a, b);
        let c = generate_design(&params(2, 1, 1)).unwrap().to_json();
        assert_ne!(a, c);
    }

    #[test]
    fn register_count_matches_bank_widths() {
        let d = generate_design(&params(7, 3, 4)).unwrap();
        let doc: NetlistDoc = serde_json::from_str(&d.to_json()).unwrap();
        let width_of = |name: &str| {
            doc.nets
                .iter()
                .find(|n| n.name == name)
                .map(|n| n.width)
                .unwrap()
        };
        let bank_bits: u32 = doc
            .nodes
            .iter()
            .filter(|n| n.kind == "REG")
            .map(|n| width_of(&n.output))
            .sum();
        assert!(bank_bits > 0);
        assert_eq!(d.register_bits(), bank_bits as usize);
    }

    #[test]
    fn hundred_seeds_parse_and_simulate() {
        for seed in 0..100 {
            let p = GenParams {
                seed,
                n_stages: 1 + (seed as usize % 3),
                ops_per_stage: 1 + (seed as usize % 6),
                width_min: 1,
                width_max: 12,
                clock: ClockSpec::Choice(vec![0.5, 1.0, 2.0]),
            };
            let d = generate_design(&p).unwrap();
            let again = WordDesign::parse(&d.to_json()).unwrap();
            assert_eq!(d, again);
            let stim = vec![vec![true; d.input_bits()]; 3];
            simulate_word(&d, &stim, 3).unwrap();
        }
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = GenParams::default();
        p.width_min = 9;
        assert!(generate_design(&p).is_err());
        p = GenParams::default();
        p.clock = ClockSpec::Choice(vec![]);
        assert!(generate_design(&p).is_err());
    }
}
