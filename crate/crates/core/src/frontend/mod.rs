// SPDX-License-Identifier: Apache-2.0

//! Word-level netlists.
//!
//! A [`WordDesign`] is built from the canonical JSON netlist document
//! ([`NetlistDoc`]) and is immutable afterwards. Construction validates every
//! structural invariant up front, so downstream passes (simulation, lowering)
//! can assume single drivers, consistent widths and an acyclic combinational
//! core.
//!
//! Conventions:
//! - all arithmetic is unsigned; ADD/SUB operands are zero-extended to the
//!   output width;
//! - CONCAT lists its inputs most-significant first;
//! - MUX inputs are `[select, then, else]`, `then` is chosen when select is 1;
//! - REG has a single implicit clock, resets to 0 and takes an optional
//!   1-bit `enable` parameter.

mod doc;
mod gen;
mod sim;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

pub use doc::{NetDoc, NetlistDoc, NodeDoc, ParamsDoc, PortDoc};
pub use gen::{generate_design, ClockSpec, GenError, GenParams};
pub use sim::{simulate_word, SimError, WordSimulator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown node kind `{0}`")]
    UnknownKind(String),
    #[error("width mismatch on `{name}`: {detail}")]
    WidthMismatch { name: String, detail: String },
    #[error("net `{0}` has multiple drivers")]
    MultipleDrivers(String),
    #[error("combinational cycle through net `{0}`")]
    CombinationalCycle(String),
    #[error("reference to undeclared net `{0}`")]
    UndeclaredNet(String),
    #[error("net `{0}` is dangling (no driver)")]
    UndrivenNet(String),
    #[error("name `{0}` declared more than once")]
    DuplicateName(String),
    #[error("invalid parameters on node driving `{name}`: {detail}")]
    InvalidParams { name: String, detail: String },
    #[error("invalid port direction `{dir}` on `{name}`")]
    InvalidDirection { name: String, dir: String },
    #[error("clock period must be positive and finite, got {0}")]
    InvalidClock(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WordKind {
    Const,
    Not,
    And,
    Or,
    Xor,
    Add,
    Sub,
    Mux,
    Eq,
    Lt,
    Shl,
    Shr,
    Concat,
    Slice,
    RedOr,
    RedAnd,
    RedXor,
    Reg,
}

impl WordKind {
    pub const ALL: [WordKind; 18] = [
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
        WordKind::Reg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WordKind::Const => "CONST",
            WordKind::Not => "NOT",
            WordKind::And => "AND",
            WordKind::Or => "OR",
            WordKind::Xor => "XOR",
            WordKind::Add => "ADD",
            WordKind::Sub => "SUB",
            WordKind::Mux => "MUX",
            WordKind::Eq => "EQ",
            WordKind::Lt => "LT",
            WordKind::Shl => "SHL",
            WordKind::Shr => "SHR",
            WordKind::Concat => "CONCAT",
            WordKind::Slice => "SLICE",
            WordKind::RedOr => "REDOR",
            WordKind::RedAnd => "REDAND",
            WordKind::RedXor => "REDXOR",
            WordKind::Reg => "REG",
        }
    }
}

impl fmt::Display for WordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WordKind {
    type Err = NetlistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WordKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| NetlistError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignalId(pub u32);

impl SignalId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalRole {
    Input,
    Output,
    Wire,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub name: String,
    pub width: u32,
    pub role: SignalRole,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeParams {
    None,
    Const { value: BigUint },
    Shift { amount: u32 },
    Slice { hi: u32, lo: u32 },
    Reg { enable: Option<SignalId> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordNode {
    pub kind: WordKind,
    pub inputs: Vec<SignalId>,
    pub output: SignalId,
    pub params: NodeParams,
}

/// An ADD/SUB operand narrower than the node output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroExtension {
    pub node: usize,
    pub operand: usize,
    pub from_width: u32,
    pub to_width: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordDesign {
    name: String,
    clock_period_ns: f64,
    /// Ports in declaration order, followed by internal nets.
    signals: Vec<Signal>,
    n_ports: usize,
    nodes: Vec<WordNode>,
    /// Non-REG nodes in dependency order.
    comb_order: Vec<usize>,
    zero_extensions: Vec<ZeroExtension>,
}

impl WordDesign {
    /// Parse and validate a JSON netlist document.
    pub fn parse(text: &str) -> Result<Self, NetlistError> {
        let doc: NetlistDoc = serde_json::from_str(text).map_err(|e| NetlistError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_doc(&doc)
    }

    pub fn from_doc(doc: &NetlistDoc) -> Result<Self, NetlistError> {
        if !(doc.clock_period_ns.is_finite() && doc.clock_period_ns > 0.0) {
            return Err(NetlistError::InvalidClock(doc.clock_period_ns));
        }

        let mut signals = Vec::with_capacity(doc.ports.len() + doc.nets.len());
        let mut by_name: HashMap<String, SignalId> = HashMap::new();
        let mut declare = |signals: &mut Vec<Signal>, name: &str, width: u32, role| {
            if width == 0 {
                return Err(NetlistError::WidthMismatch {
                    name: name.to_string(),
                    detail: "width must be at least 1".into(),
                });
            }
            let id = SignalId(signals.len() as u32);
            if by_name.insert(name.to_string(), id).is_some() {
                return Err(NetlistError::DuplicateName(name.to_string()));
            }
            signals.push(Signal {
                name: name.to_string(),
                width,
                role,
            });
            Ok(())
        };
        for port in &doc.ports {
            let role = match port.dir.as_str() {
                "input" => SignalRole::Input,
                "output" => SignalRole::Output,
                other => {
                    return Err(NetlistError::InvalidDirection {
                        name: port.name.clone(),
                        dir: other.to_string(),
                    })
                }
            };
            declare(&mut signals, &port.name, port.width, role)?;
        }
        let n_ports = signals.len();
        for net in &doc.nets {
            declare(&mut signals, &net.name, net.width, SignalRole::Wire)?;
        }
        drop(declare);

        let resolve = |name: &str| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| NetlistError::UndeclaredNet(name.to_string()))
        };

        let mut nodes = Vec::with_capacity(doc.nodes.len());
        let mut zero_extensions = Vec::new();
        for (idx, nd) in doc.nodes.iter().enumerate() {
            let kind: WordKind = nd.kind.parse()?;
            let inputs = nd
                .inputs
                .iter()
                .map(|n| resolve(n))
                .collect::<Result<Vec<_>, _>>()?;
            let output = resolve(&nd.output)?;
            let params = parse_params(kind, nd, &signals, &resolve)?;
            let node = WordNode {
                kind,
                inputs,
                output,
                params,
            };
            check_widths(&node, &signals)?;
            if matches!(kind, WordKind::Add | WordKind::Sub) {
                let out_w = signals[output.index()].width;
                for (operand, s) in node.inputs.iter().enumerate() {
                    let w = signals[s.index()].width;
                    if w < out_w {
                        zero_extensions.push(ZeroExtension {
                            node: idx,
                            operand,
                            from_width: w,
                            to_width: out_w,
                        });
                    }
                }
            }
            nodes.push(node);
        }

        // single driver per signal
        let mut driver: Vec<Option<usize>> = vec![None; signals.len()];
        for (idx, node) in nodes.iter().enumerate() {
            let out = node.output.index();
            if signals[out].role == SignalRole::Input || driver[out].is_some() {
                return Err(NetlistError::MultipleDrivers(signals[out].name.clone()));
            }
            driver[out] = Some(idx);
        }
        for (i, s) in signals.iter().enumerate() {
            if s.role != SignalRole::Input && driver[i].is_none() {
                return Err(NetlistError::UndrivenNet(s.name.clone()));
            }
        }

        let comb_order = comb_order(&nodes, &driver, &signals)?;

        Ok(WordDesign {
            name: doc.name.clone(),
            clock_period_ns: doc.clock_period_ns,
            signals,
            n_ports,
            nodes,
            comb_order,
            zero_extensions,
        })
    }

    pub fn to_doc(&self) -> NetlistDoc {
        let name_of = |s: SignalId| self.signals[s.index()].name.clone();
        let ports = self.signals[..self.n_ports]
            .iter()
            .map(|s| PortDoc {
                name: s.name.clone(),
                dir: match s.role {
                    SignalRole::Input => "input".into(),
                    _ => "output".into(),
                },
                width: s.width,
            })
            .collect();
        let nets = self.signals[self.n_ports..]
            .iter()
            .map(|s| NetDoc {
                name: s.name.clone(),
                width: s.width,
            })
            .collect();
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let mut params = ParamsDoc::default();
                match &n.params {
                    NodeParams::None => {}
                    NodeParams::Const { value } => {
                        params.value = Some(value.to_str_radix(10));
                        params.width = Some(self.signals[n.output.index()].width);
                    }
                    NodeParams::Shift { amount } => params.amount = Some(*amount),
                    NodeParams::Slice { hi, lo } => {
                        params.hi = Some(*hi);
                        params.lo = Some(*lo);
                    }
                    NodeParams::Reg { enable } => params.enable = enable.map(name_of),
                }
                NodeDoc {
                    kind: n.kind.as_str().to_string(),
                    inputs: n.inputs.iter().map(|&s| name_of(s)).collect(),
                    output: name_of(n.output),
                    params,
                }
            })
            .collect();
        NetlistDoc {
            name: self.name.clone(),
            clock_period_ns: self.clock_period_ns,
            ports,
            nets,
            nodes,
        }
    }

    /// Pretty-printed canonical document.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("netlist doc serializes");
        s.push('\n');
        s
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn clock_period_ns(&self) -> f64 {
        self.clock_period_ns
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn signal(&self, id: SignalId) -> &Signal {
        &self.signals[id.index()]
    }

    pub fn find(&self, name: &str) -> Option<SignalId> {
        self.signals
            .iter()
            .position(|s| s.name == name)
            .map(|i| SignalId(i as u32))
    }

    pub fn ports(&self) -> &[Signal] {
        &self.signals[..self.n_ports]
    }

    /// Input ports in declaration order.
    pub fn inputs(&self) -> impl Iterator<Item = SignalId> + '_ {
        self.port_ids(SignalRole::Input)
    }

    /// Output ports in declaration order.
    pub fn outputs(&self) -> impl Iterator<Item = SignalId> + '_ {
        self.port_ids(SignalRole::Output)
    }

    fn port_ids(&self, role: SignalRole) -> impl Iterator<Item = SignalId> + '_ {
        self.signals[..self.n_ports]
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.role == role)
            .map(|(i, _)| SignalId(i as u32))
    }

    pub fn input_bits(&self) -> usize {
        self.inputs().map(|s| self.signal(s).width as usize).sum()
    }

    pub fn output_bits(&self) -> usize {
        self.outputs().map(|s| self.signal(s).width as usize).sum()
    }

    pub fn nodes(&self) -> &[WordNode] {
        &self.nodes
    }

    pub fn comb_order(&self) -> &[usize] {
        &self.comb_order
    }

    pub fn zero_extensions(&self) -> &[ZeroExtension] {
        &self.zero_extensions
    }

    pub fn registers(&self) -> impl Iterator<Item = &WordNode> {
        self.nodes.iter().filter(|n| n.kind == WordKind::Reg)
    }

    /// Total number of register bits.
    pub fn register_bits(&self) -> usize {
        self.registers()
            .map(|n| self.signal(n.output).width as usize)
            .sum()
    }
}

fn parse_params(
    kind: WordKind,
    nd: &NodeDoc,
    signals: &[Signal],
    resolve: &dyn Fn(&str) -> Result<SignalId, NetlistError>,
) -> Result<NodeParams, NetlistError> {
    let p = &nd.params;
    let bad = |detail: &str| NetlistError::InvalidParams {
        name: nd.output.clone(),
        detail: detail.to_string(),
    };
    let allowed: &[&str] = match kind {
        WordKind::Const => &["value", "width"],
        WordKind::Shl | WordKind::Shr => &["amount"],
        WordKind::Slice => &["hi", "lo"],
        WordKind::Reg => &["enable"],
        _ => &[],
    };
    let present = [
        ("value", p.value.is_some()),
        ("width", p.width.is_some()),
        ("amount", p.amount.is_some()),
        ("hi", p.hi.is_some()),
        ("lo", p.lo.is_some()),
        ("enable", p.enable.is_some()),
    ];
    if let Some((field, _)) = present
        .iter()
        .find(|(f, set)| *set && !allowed.contains(f))
    {
        return Err(bad(&format!("parameter `{field}` not valid for {kind}")));
    }
    Ok(match kind {
        WordKind::Const => {
            let text = p.value.as_deref().ok_or_else(|| bad("missing `value`"))?;
            let value = BigUint::from_str(text)
                .map_err(|_| bad(&format!("`{text}` is not a decimal constant")))?;
            let width = p.width.ok_or_else(|| bad("missing `width`"))?;
            let out = resolve(&nd.output)?;
            if signals[out.index()].width != width {
                return Err(NetlistError::WidthMismatch {
                    name: nd.output.clone(),
                    detail: format!(
                        "constant width {width} vs net width {}",
                        signals[out.index()].width
                    ),
                });
            }
            if value.bits() > u64::from(width) {
                return Err(NetlistError::WidthMismatch {
                    name: nd.output.clone(),
                    detail: format!("constant {text} does not fit in {width} bits"),
                });
            }
            NodeParams::Const { value }
        }
        WordKind::Shl | WordKind::Shr => NodeParams::Shift {
            amount: p.amount.ok_or_else(|| bad("missing `amount`"))?,
        },
        WordKind::Slice => NodeParams::Slice {
            hi: p.hi.ok_or_else(|| bad("missing `hi`"))?,
            lo: p.lo.ok_or_else(|| bad("missing `lo`"))?,
        },
        WordKind::Reg => NodeParams::Reg {
            enable: p.enable.as_deref().map(resolve).transpose()?,
        },
        _ => NodeParams::None,
    })
}

fn check_widths(node: &WordNode, signals: &[Signal]) -> Result<(), NetlistError> {
    let w = |s: SignalId| signals[s.index()].width;
    let out_name = &signals[node.output.index()].name;
    let out_w = w(node.output);
    let mismatch = |detail: String| NetlistError::WidthMismatch {
        name: out_name.clone(),
        detail,
    };
    let arity = |n: usize| {
        if node.inputs.len() == n {
            Ok(())
        } else {
            Err(mismatch(format!(
                "{} expects {n} inputs, got {}",
                node.kind,
                node.inputs.len()
            )))
        }
    };
    let same = |s: SignalId, expect: u32| {
        if w(s) == expect {
            Ok(())
        } else {
            Err(mismatch(format!(
                "{} operand `{}` is {} bits, expected {expect}",
                node.kind,
                signals[s.index()].name,
                w(s)
            )))
        }
    };
    match node.kind {
        WordKind::Const => arity(0),
        WordKind::Not => {
            arity(1)?;
            same(node.inputs[0], out_w)
        }
        WordKind::And | WordKind::Or | WordKind::Xor => {
            arity(2)?;
            same(node.inputs[0], out_w)?;
            same(node.inputs[1], out_w)
        }
        WordKind::Add | WordKind::Sub => {
            arity(2)?;
            for &s in &node.inputs {
                if w(s) > out_w {
                    return Err(mismatch(format!(
                        "operand `{}` ({} bits) is wider than the {out_w}-bit result",
                        signals[s.index()].name,
                        w(s)
                    )));
                }
            }
            Ok(())
        }
        WordKind::Mux => {
            arity(3)?;
            same(node.inputs[0], 1)?;
            same(node.inputs[1], out_w)?;
            same(node.inputs[2], out_w)
        }
        WordKind::Eq | WordKind::Lt => {
            arity(2)?;
            same(node.inputs[1], w(node.inputs[0]))?;
            if out_w != 1 {
                return Err(mismatch(format!("{} result must be 1 bit", node.kind)));
            }
            Ok(())
        }
        WordKind::Shl | WordKind::Shr => {
            arity(1)?;
            same(node.inputs[0], out_w)?;
            match node.params {
                NodeParams::Shift { amount } if amount < out_w => Ok(()),
                _ => Err(mismatch(format!("shift amount must be < {out_w}"))),
            }
        }
        WordKind::Concat => {
            if node.inputs.is_empty() {
                return Err(mismatch("CONCAT needs at least one input".into()));
            }
            let total: u32 = node.inputs.iter().map(|&s| w(s)).sum();
            if total != out_w {
                return Err(mismatch(format!(
                    "CONCAT inputs sum to {total} bits, output is {out_w}"
                )));
            }
            Ok(())
        }
        WordKind::Slice => {
            arity(1)?;
            match node.params {
                NodeParams::Slice { hi, lo } if lo <= hi && hi < w(node.inputs[0]) => {
                    if hi - lo + 1 == out_w {
                        Ok(())
                    } else {
                        Err(mismatch(format!(
                            "slice [{hi}:{lo}] yields {} bits, output is {out_w}",
                            hi - lo + 1
                        )))
                    }
                }
                _ => Err(mismatch("slice bounds out of range".into())),
            }
        }
        WordKind::RedOr | WordKind::RedAnd | WordKind::RedXor => {
            arity(1)?;
            if out_w != 1 {
                return Err(mismatch(format!("{} result must be 1 bit", node.kind)));
            }
            Ok(())
        }
        WordKind::Reg => {
            arity(1)?;
            same(node.inputs[0], out_w)?;
            if let NodeParams::Reg { enable: Some(en) } = node.params {
                same(en, 1)?;
            }
            Ok(())
        }
    }
}

/// Kahn ordering of the non-REG nodes; REG outputs and input ports are sources.
fn comb_order(
    nodes: &[WordNode],
    driver: &[Option<usize>],
    signals: &[Signal],
) -> Result<Vec<usize>, NetlistError> {
    let comb_driver = |s: SignalId| driver[s.index()].filter(|&d| nodes[d].kind != WordKind::Reg);
    let mut indegree = vec![0usize; nodes.len()];
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (idx, node) in nodes.iter().enumerate() {
        if node.kind == WordKind::Reg {
            continue;
        }
        for &s in &node.inputs {
            if let Some(d) = comb_driver(s) {
                indegree[idx] += 1;
                users[d].push(idx);
            }
        }
    }
    let mut ready: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].kind != WordKind::Reg && indegree[i] == 0)
        .rev()
        .collect();
    let mut order = Vec::new();
    while let Some(i) = ready.pop() {
        order.push(i);
        for &u in users[i].iter().rev() {
            indegree[u] -= 1;
            if indegree[u] == 0 {
                ready.push(u);
            }
        }
    }
    let n_comb = nodes.iter().filter(|n| n.kind != WordKind::Reg).count();
    if order.len() != n_comb {
        let stuck = (0..nodes.len())
            .find(|&i| nodes[i].kind != WordKind::Reg && indegree[i] > 0)
            .expect("a node with remaining indegree exists");
        return Err(NetlistError::CombinationalCycle(
            signals[nodes[stuck].output.index()].name.clone(),
        ));
    }
    Ok(order)
}

/// Little-endian bits of `value`, zero-padded or truncated to `width`.
pub fn value_bits(value: &BigUint, width: u32) -> Vec<bool> {
    (0..u64::from(width)).map(|i| value.bit(i)).collect()
}

/// Inverse of [`value_bits`].
pub fn bits_value(bits: &[bool]) -> BigUint {
    let mut v = BigUint::zero();
    for (i, &b) in bits.iter().enumerate() {
        if b {
            v.set_bit(i as u64, true);
        }
    }
    v
}

/// Pack per-port input values into the flat input bit vector (ports in
/// declaration order, LSB first).
pub fn pack_inputs(design: &WordDesign, values: &[u64]) -> Vec<bool> {
    let mut bits = Vec::with_capacity(design.input_bits());
    for (port, &v) in design.inputs().zip(values) {
        bits.extend(value_bits(&BigUint::from(v), design.signal(port).width));
    }
    bits
}

/// Split a flat output bit vector back into one value per output port.
pub fn unpack_outputs(design: &WordDesign, bits: &[bool]) -> Vec<BigUint> {
    let mut at = 0;
    design
        .outputs()
        .map(|port| {
            let w = design.signal(port).width as usize;
            let v = bits_value(&bits[at..at + w]);
            at += w;
            v
        })
        .collect()
}

pub(crate) fn mask(width: u32) -> BigUint {
    (BigUint::one() << width as usize) - BigUint::one()
}
