// SPDX-License-Identifier: Apache-2.0

//! Liberty (.lib) subset reader.
//!
//! Understood: library units and `nom_voltage`, `lu_table_template` variable
//! order, and per cell `area`, `cell_leakage_power`, an optional scalar
//! `internal_energy`, pins (`direction`, `capacitance`, `clock`), `ff` groups
//! and `timing` groups with NLDM delay/transition/constraint tables. Anything
//! else is skipped and counted in [`Library::warnings`].
//!
//! All values are converted at parse time to ns, fF, V, uW and fJ. Rise and
//! fall tables are collapsed into one table by element-wise max.

mod parse;
mod table;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use log::debug;
use thiserror::Error;

use parse::{parse_groups, AttrValue, Group};
pub use table::LookupTable2D;

/// Setup time used when a sequential cell declares no setup constraint.
pub const DEFAULT_SETUP_NS: f64 = 0.04;
/// Clock-to-q delay used when a sequential cell declares no launch arc.
pub const DEFAULT_CLK_TO_Q_NS: f64 = 0.05;

/// The six-cell fixture library bundled with the repository.
pub const FIXTURE_LIBERTY: &str = include_str!("../../../../fixtures/techlib.lib");

pub fn fixture_library() -> Library {
    Library::parse(FIXTURE_LIBERTY).expect("bundled fixture library parses")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LibertyError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unbalanced braces (group opened at line {line})")]
    UnbalancedBraces { line: usize },
    #[error("line {line}: {context} is missing required attribute `{attr}`")]
    MissingAttribute {
        line: usize,
        context: String,
        attr: String,
    },
    #[error("line {line}: table axis is not strictly ascending")]
    NonAscendingAxis { line: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown cell `{0}`")]
    UnknownCell(String),
    #[error("cell `{cell}` has no pin `{pin}`")]
    UnknownPin { cell: String, pin: String },
    #[error("cell `{cell}` has no attribute `{attr}`")]
    UnknownAttribute { cell: String, attr: String },
}

/// Scale factors from library units to ns, fF, V, uW and fJ.
#[derive(Clone, Debug, PartialEq)]
pub struct Units {
    pub time_ns: f64,
    pub cap_ff: f64,
    pub voltage_v: f64,
    pub leakage_uw: f64,
    pub energy_fj: f64,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            time_ns: 1.0,
            cap_ff: 1.0,
            voltage_v: 1.0,
            leakage_uw: 1.0,
            energy_fj: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PinDirection {
    Input,
    Output,
    Inout,
    Internal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pin {
    pub name: String,
    pub direction: PinDirection,
    pub capacitance_ff: f64,
    pub is_clock: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcKind {
    Combinational,
    /// Launch arc from the clock pin of a sequential cell.
    ClockToQ,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingArc {
    pub from_pin: String,
    pub to_pin: String,
    pub kind: ArcKind,
    pub delay: LookupTable2D,
    pub slew: Option<LookupTable2D>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub name: String,
    pub area: f64,
    pub leakage_uw: f64,
    /// Explicit per-toggle internal energy, when the library declares one.
    pub internal_energy_fj: Option<f64>,
    pub pins: Vec<Pin>,
    pub arcs: Vec<TimingArc>,
    pub setup_ns: Option<f64>,
    pub is_sequential: bool,
}

impl Cell {
    pub fn pin(&self, name: &str) -> Option<&Pin> {
        self.pins.iter().find(|p| p.name == name)
    }

    /// Non-clock input pins in declaration order.
    pub fn data_inputs(&self) -> impl Iterator<Item = &Pin> {
        self.pins
            .iter()
            .filter(|p| p.direction == PinDirection::Input && !p.is_clock)
    }

    /// Capacitance seen by the `position`-th data input (last pin reused past the end).
    pub fn input_cap(&self, position: usize) -> f64 {
        let caps: Vec<f64> = self.data_inputs().map(|p| p.capacitance_ff).collect();
        match caps.len() {
            0 => 0.0,
            n => caps[position.min(n - 1)],
        }
    }

    fn launch_arcs(&self) -> impl Iterator<Item = &TimingArc> {
        let want = if self.is_sequential {
            ArcKind::ClockToQ
        } else {
            ArcKind::Combinational
        };
        self.arcs.iter().filter(move |a| a.kind == want)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellAttr {
    Area,
    Leakage,
    InputCap(String),
    InternalEnergy,
    Setup,
    ClkToQ,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Library {
    pub name: String,
    pub units: Units,
    pub nom_voltage: f64,
    pub cells: BTreeMap<String, Cell>,
    /// Number of skipped (unsupported) attributes and groups.
    pub warnings: usize,
}

impl Library {
    pub fn parse(text: &str) -> Result<Self, LibertyError> {
        let top = parse_groups(text)?;
        if top.kind != "library" {
            return Err(LibertyError::Malformed {
                line: top.line,
                message: format!("expected `library` group, found `{}`", top.kind),
            });
        }
        Reader::default().library(&top)
    }

    pub fn cell(&self, name: &str) -> Result<&Cell, LibertyError> {
        self.cells
            .get(name)
            .ok_or_else(|| LibertyError::UnknownCell(name.to_string()))
    }

    /// Worst-case delay and output slew over the cell's launch arcs.
    ///
    /// Combinational cells use their pin-to-pin arcs, sequential cells their
    /// clock-to-q arcs. Without a slew table the input slew passes through.
    pub fn delay_of(
        &self,
        cell: &str,
        input_slew: f64,
        load: f64,
    ) -> Result<(f64, f64), LibertyError> {
        let c = self.cell(cell)?;
        let mut delay: f64 = 0.0;
        let mut slew: Option<f64> = None;
        for arc in c.launch_arcs() {
            delay = delay.max(arc.delay.lookup(input_slew, load));
            if let Some(t) = &arc.slew {
                let s = t.lookup(input_slew, load);
                slew = Some(slew.map_or(s, |v: f64| v.max(s)));
            }
        }
        Ok((delay, slew.unwrap_or(input_slew)))
    }

    pub fn cell_attr(&self, cell: &str, attr: &CellAttr) -> Result<f64, LibertyError> {
        let c = self.cell(cell)?;
        let missing = |a: &str| LibertyError::UnknownAttribute {
            cell: cell.to_string(),
            attr: a.to_string(),
        };
        match attr {
            CellAttr::Area => Ok(c.area),
            CellAttr::Leakage => Ok(c.leakage_uw),
            CellAttr::InputCap(pin) => c
                .pin(pin)
                .filter(|p| p.direction != PinDirection::Output)
                .map(|p| p.capacitance_ff)
                .ok_or_else(|| LibertyError::UnknownPin {
                    cell: cell.to_string(),
                    pin: pin.clone(),
                }),
            CellAttr::InternalEnergy => Ok(self.internal_energy(c)),
            CellAttr::Setup if c.is_sequential => Ok(c.setup_ns.unwrap_or(DEFAULT_SETUP_NS)),
            CellAttr::Setup => Err(missing("setup")),
            CellAttr::ClkToQ if c.is_sequential => Ok(c
                .launch_arcs()
                .map(|a| a.delay.lookup(0.0, 0.0))
                .reduce(f64::max)
                .unwrap_or(DEFAULT_CLK_TO_Q_NS)),
            CellAttr::ClkToQ => Err(missing("clk_to_q")),
        }
    }

    /// Explicit internal energy, else 0.5 * (sum of input caps) * V^2.
    pub fn internal_energy(&self, cell: &Cell) -> f64 {
        cell.internal_energy_fj.unwrap_or_else(|| {
            let caps: f64 = cell
                .pins
                .iter()
                .filter(|p| p.direction == PinDirection::Input)
                .map(|p| p.capacitance_ff)
                .sum();
            0.5 * caps * self.nom_voltage * self.nom_voltage
        })
    }

    /// Re-serialize in canonical units (ns, fF, V, uW, fJ).
    pub fn to_liberty(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "library ({}) {{", self.name);
        s.push_str("  time_unit : \"1ns\";\n  voltage_unit : \"1V\";\n");
        s.push_str("  leakage_power_unit : \"1uW\";\n  capacitive_load_unit (1, ff);\n");
        let _ = writeln!(s, "  nom_voltage : {};", self.nom_voltage);
        for cell in self.cells.values() {
            let _ = writeln!(s, "  cell ({}) {{", cell.name);
            let _ = writeln!(s, "    area : {};", cell.area);
            let _ = writeln!(s, "    cell_leakage_power : {};", cell.leakage_uw);
            if let Some(e) = cell.internal_energy_fj {
                let _ = writeln!(s, "    internal_energy : {e};");
            }
            if cell.is_sequential {
                s.push_str("    ff (IQ, IQN) { }\n");
            }
            for pin in &cell.pins {
                let dir = match pin.direction {
                    PinDirection::Input => "input",
                    PinDirection::Output => "output",
                    PinDirection::Inout => "inout",
                    PinDirection::Internal => "internal",
                };
                let _ = writeln!(s, "    pin ({}) {{", pin.name);
                let _ = writeln!(s, "      direction : {dir};");
                let _ = writeln!(s, "      capacitance : {};", pin.capacitance_ff);
                if pin.is_clock {
                    s.push_str("      clock : true;\n");
                }
                if let (Some(setup), Some(clk)) = (cell.setup_ns, cell.pins.iter().find(|p| p.is_clock)) {
                    if pin.direction == PinDirection::Input && !pin.is_clock {
                        let _ = writeln!(
                            s,
                            "      timing () {{\n        related_pin : \"{}\";\n        timing_type : setup_rising;\n        rise_constraint (scalar) {{ values (\"{setup}\"); }}\n      }}",
                            clk.name
                        );
                    }
                }
                for arc in cell.arcs.iter().filter(|a| a.to_pin == pin.name) {
                    let _ = writeln!(s, "      timing () {{");
                    let _ = writeln!(s, "        related_pin : \"{}\";", arc.from_pin);
                    if arc.kind == ArcKind::ClockToQ {
                        s.push_str("        timing_type : rising_edge;\n");
                    }
                    write_table(&mut s, "cell_rise", &arc.delay);
                    if let Some(t) = &arc.slew {
                        write_table(&mut s, "rise_transition", t);
                    }
                    s.push_str("      }\n");
                }
                s.push_str("    }\n");
            }
            s.push_str("  }\n");
        }
        s.push_str("}\n");
        s
    }
}

fn write_table(s: &mut String, name: &str, t: &LookupTable2D) {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let _ = writeln!(s, "        {name} (tbl) {{");
    let _ = writeln!(s, "          index_1 (\"{}\");", join(&t.slew_axis));
    let _ = writeln!(s, "          index_2 (\"{}\");", join(&t.load_axis));
    let rows: Vec<String> = t
        .values
        .chunks(t.load_axis.len())
        .map(|r| format!("\"{}\"", join(r)))
        .collect();
    let _ = writeln!(s, "          values ({});", rows.join(", "));
    s.push_str("        }\n");
}

#[derive(Clone, Copy, PartialEq)]
enum Var {
    Slew,
    Load,
    Other,
}

#[derive(Default)]
struct Reader {
    templates: HashMap<String, Vec<Var>>,
    units: Units,
    warnings: usize,
}

impl Reader {
    fn warn(&mut self, line: usize, what: &str) {
        self.warnings += 1;
        debug!("liberty line {line}: skipping {what}");
    }

    fn library(mut self, g: &Group) -> Result<Library, LibertyError> {
        let mut nom_voltage = 1.0;
        for a in &g.attrs {
            match (a.name.as_str(), &a.value) {
                ("time_unit", AttrValue::Simple(v)) => {
                    self.units.time_ns = unit_scale(v, &[("ps", 1e-3), ("ns", 1.0), ("us", 1e3)], a.line)?
                }
                ("voltage_unit", AttrValue::Simple(v)) => {
                    self.units.voltage_v = unit_scale(v, &[("mV", 1e-3), ("V", 1.0)], a.line)?
                }
                ("leakage_power_unit", AttrValue::Simple(v)) => {
                    self.units.leakage_uw = unit_scale(
                        v,
                        &[("pW", 1e-6), ("nW", 1e-3), ("uW", 1.0), ("mW", 1e3), ("W", 1e6)],
                        a.line,
                    )?
                }
                ("capacitive_load_unit", AttrValue::Complex(args)) if args.len() == 2 => {
                    let n = number(&args[0], a.line)?;
                    let f = match args[1].to_ascii_lowercase().as_str() {
                        "ff" => 1.0,
                        "pf" => 1e3,
                        other => {
                            return Err(LibertyError::Malformed {
                                line: a.line,
                                message: format!("unknown capacitance unit `{other}`"),
                            })
                        }
                    };
                    self.units.cap_ff = n * f;
                }
                ("nom_voltage", AttrValue::Simple(v)) => nom_voltage = number(v, a.line)?,
                _ => self.warn(a.line, &format!("library attribute `{}`", a.name)),
            }
        }
        self.units.energy_fj = self.units.cap_ff * self.units.voltage_v * self.units.voltage_v;
        nom_voltage *= self.units.voltage_v;

        let mut cells = BTreeMap::new();
        for sub in &g.groups {
            match sub.kind.as_str() {
                "lu_table_template" => {
                    let vars = ["variable_1", "variable_2", "variable_3"]
                        .iter()
                        .filter_map(|v| sub.simple(v))
                        .map(|v| match v {
                            "input_net_transition" | "constrained_pin_transition" => Var::Slew,
                            "total_output_net_capacitance" | "related_pin_transition" => {
                                if v == "related_pin_transition" {
                                    Var::Other
                                } else {
                                    Var::Load
                                }
                            }
                            _ => Var::Other,
                        })
                        .collect();
                    if let Some(name) = sub.args.first() {
                        self.templates.insert(name.clone(), vars);
                    }
                }
                "cell" => {
                    let cell = self.cell(sub)?;
                    if cells.contains_key(&cell.name) {
                        return Err(LibertyError::Malformed {
                            line: sub.line,
                            message: format!("duplicate cell `{}`", cell.name),
                        });
                    }
                    cells.insert(cell.name.clone(), cell);
                }
                other => self.warn(sub.line, &format!("`{other}` group")),
            }
        }
        Ok(Library {
            name: g.args.first().cloned().unwrap_or_default(),
            units: self.units,
            nom_voltage,
            cells,
            warnings: self.warnings,
        })
    }

    fn cell(&mut self, g: &Group) -> Result<Cell, LibertyError> {
        let name = g.args.first().cloned().ok_or_else(|| LibertyError::Malformed {
            line: g.line,
            message: "cell group without a name".into(),
        })?;
        let ctx = format!("cell `{name}`");
        let area = number(
            g.simple("area").ok_or_else(|| LibertyError::MissingAttribute {
                line: g.line,
                context: ctx.clone(),
                attr: "area".into(),
            })?,
            g.attr_line("area"),
        )?;
        let leakage_uw = match g.simple("cell_leakage_power") {
            Some(v) => number(v, g.attr_line("cell_leakage_power"))? * self.units.leakage_uw,
            None => 0.0,
        };
        let internal_energy_fj = g
            .simple("internal_energy")
            .map(|v| number(v, g.attr_line("internal_energy")))
            .transpose()?
            .map(|e| e * self.units.energy_fj);
        for a in &g.attrs {
            if !matches!(a.name.as_str(), "area" | "cell_leakage_power" | "internal_energy") {
                self.warn(a.line, &format!("cell attribute `{}`", a.name));
            }
        }

        let mut pins = Vec::new();
        let mut arcs = Vec::new();
        let mut setup_ns: Option<f64> = None;
        let mut is_sequential = false;
        for sub in &g.groups {
            match sub.kind.as_str() {
                "ff" | "latch" => is_sequential = true,
                "pin" => {
                    for pin_name in &sub.args {
                        let (pin, pin_arcs, setup) = self.pin(sub, pin_name, &ctx)?;
                        if let Some(s) = setup {
                            setup_ns = Some(setup_ns.map_or(s, |v| v.max(s)));
                        }
                        pins.push(pin);
                        arcs.extend(pin_arcs);
                    }
                }
                other => self.warn(sub.line, &format!("`{other}` group in {ctx}")),
            }
        }
        if pins.iter().any(|p| p.is_clock) {
            is_sequential = true;
        }
        Ok(Cell {
            name,
            area,
            leakage_uw,
            internal_energy_fj,
            pins,
            arcs,
            setup_ns,
            is_sequential,
        })
    }

    fn pin(
        &mut self,
        g: &Group,
        pin_name: &str,
        cell_ctx: &str,
    ) -> Result<(Pin, Vec<TimingArc>, Option<f64>), LibertyError> {
        let ctx = format!("pin `{pin_name}` of {cell_ctx}");
        let direction = match g.simple("direction") {
            Some("input") => PinDirection::Input,
            Some("output") => PinDirection::Output,
            Some("inout") => PinDirection::Inout,
            Some("internal") => PinDirection::Internal,
            Some(other) => {
                return Err(LibertyError::Malformed {
                    line: g.attr_line("direction"),
                    message: format!("unknown pin direction `{other}`"),
                })
            }
            None => {
                return Err(LibertyError::MissingAttribute {
                    line: g.line,
                    context: ctx,
                    attr: "direction".into(),
                })
            }
        };
        let capacitance_ff = match g.simple("capacitance") {
            Some(v) => number(v, g.attr_line("capacitance"))? * self.units.cap_ff,
            None if direction == PinDirection::Input => {
                return Err(LibertyError::MissingAttribute {
                    line: g.line,
                    context: ctx,
                    attr: "capacitance".into(),
                })
            }
            None => 0.0,
        };
        let is_clock = g.simple("clock") == Some("true");
        for a in &g.attrs {
            if !matches!(a.name.as_str(), "direction" | "capacitance" | "clock") {
                self.warn(a.line, &format!("pin attribute `{}`", a.name));
            }
        }

        let mut arcs = Vec::new();
        let mut setup: Option<f64> = None;
        for t in &g.groups {
            if t.kind != "timing" {
                self.warn(t.line, &format!("`{}` group in {ctx}", t.kind));
                continue;
            }
            let related = t.simple("related_pin").unwrap_or("").to_string();
            let timing_type = t.simple("timing_type").unwrap_or("combinational");
            let kind = match timing_type {
                "combinational" | "combinational_rise" | "combinational_fall" => ArcKind::Combinational,
                "rising_edge" | "falling_edge" => ArcKind::ClockToQ,
                "setup_rising" | "setup_falling" => {
                    let mut worst: Option<f64> = None;
                    for tbl in ["rise_constraint", "fall_constraint"] {
                        if let Some(tg) = t.groups.iter().find(|x| x.kind == tbl) {
                            let v = self.table(tg)?.max_value() * self.units.time_ns;
                            worst = Some(worst.map_or(v, |w| w.max(v)));
                        }
                    }
                    if let Some(v) = worst {
                        setup = Some(setup.map_or(v, |s| s.max(v)));
                    }
                    continue;
                }
                other => {
                    self.warn(t.line, &format!("timing_type `{other}`"));
                    continue;
                }
            };
            let delay = self.rise_fall(t, "cell_rise", "cell_fall")?;
            let slew = self.rise_fall(t, "rise_transition", "fall_transition")?;
            let Some(delay) = delay else {
                self.warn(t.line, "timing group without delay tables");
                continue;
            };
            for from in related.split_whitespace() {
                arcs.push(TimingArc {
                    from_pin: from.to_string(),
                    to_pin: pin_name.to_string(),
                    kind,
                    delay: delay.clone(),
                    slew: slew.clone(),
                });
            }
        }
        Ok((
            Pin {
                name: pin_name.to_string(),
                direction,
                capacitance_ff,
                is_clock,
            },
            arcs,
            setup,
        ))
    }

    fn rise_fall(
        &mut self,
        t: &Group,
        rise: &str,
        fall: &str,
    ) -> Result<Option<LookupTable2D>, LibertyError> {
        let r = t.groups.iter().find(|g| g.kind == rise).map(|g| self.table(g)).transpose()?;
        let f = t.groups.iter().find(|g| g.kind == fall).map(|g| self.table(g)).transpose()?;
        let scale = |mut tbl: LookupTable2D, k: f64| {
            tbl.values.iter_mut().for_each(|v| *v *= k);
            tbl
        };
        let k = self.units.time_ns;
        Ok(match (r, f) {
            (Some(r), Some(f)) => Some(scale(r.max_with(&f), k)),
            (Some(x), None) | (None, Some(x)) => Some(scale(x, k)),
            (None, None) => None,
        })
    }

    fn table(&mut self, g: &Group) -> Result<LookupTable2D, LibertyError> {
        let template = g.args.first().map(String::as_str).unwrap_or("scalar");
        let vars = self
            .templates
            .get(template)
            .cloned()
            .unwrap_or_else(|| vec![Var::Slew, Var::Load]);
        let values_line = g.attr_line("values");
        let rows = g.complex("values").ok_or_else(|| LibertyError::MissingAttribute {
            line: g.line,
            context: format!("table `{}`", g.kind),
            attr: "values".into(),
        })?;
        let rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| number_list(r, values_line))
            .collect::<Result<_, _>>()?;
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        if template == "scalar" || values.len() == 1 {
            if values.len() != 1 {
                return Err(LibertyError::Malformed {
                    line: values_line,
                    message: "scalar table must hold exactly one value".into(),
                });
            }
            return Ok(LookupTable2D::scalar(values[0]));
        }

        let index = |k: &str| -> Result<Option<Vec<f64>>, LibertyError> {
            g.complex(k)
                .and_then(|v| v.first())
                .map(|s| number_list(s, g.attr_line(k)))
                .transpose()
        };
        let idx1 = index("index_1")?;
        let idx2 = index("index_2")?;
        let (idx1, idx2) = match (idx1, idx2) {
            (Some(a), b) => (a, b),
            _ => {
                return Err(LibertyError::MissingAttribute {
                    line: g.line,
                    context: format!("table `{}`", g.kind),
                    attr: "index_1".into(),
                })
            }
        };
        for axis in std::iter::once(&idx1).chain(idx2.as_ref()) {
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LibertyError::NonAscendingAxis { line: g.line });
            }
        }
        let n1 = idx1.len();
        let n2 = idx2.as_ref().map_or(1, Vec::len);
        if values.len() != n1 * n2 {
            return Err(LibertyError::Malformed {
                line: values_line,
                message: format!("table has {} values, axes need {}", values.len(), n1 * n2),
            });
        }
        let var1 = vars.first().copied().unwrap_or(Var::Slew);
        let var2 = vars.get(1).copied().unwrap_or(Var::Load);
        let cap = self.units.cap_ff;
        let time = self.units.time_ns;
        let scale_axis = |axis: Vec<f64>, var: Var| match var {
            Var::Load => axis.into_iter().map(|x| x * cap).collect(),
            Var::Slew => axis.into_iter().map(|x| x * time).collect(),
            Var::Other => axis,
        };
        let table = match idx2 {
            None if var1 == Var::Load => LookupTable2D {
                slew_axis: vec![0.0],
                load_axis: scale_axis(idx1, Var::Load),
                values,
            },
            None => LookupTable2D {
                slew_axis: scale_axis(idx1, var1),
                load_axis: vec![0.0],
                values,
            },
            Some(idx2) if var1 == Var::Load && var2 == Var::Slew => {
                // transpose into slew-major order
                let mut t = vec![0.0; values.len()];
                for i in 0..n1 {
                    for j in 0..n2 {
                        t[j * n1 + i] = values[i * n2 + j];
                    }
                }
                LookupTable2D {
                    slew_axis: scale_axis(idx2, Var::Slew),
                    load_axis: scale_axis(idx1, Var::Load),
                    values: t,
                }
            }
            Some(idx2) => LookupTable2D {
                slew_axis: scale_axis(idx1, var1),
                load_axis: scale_axis(idx2, var2),
                values,
            },
        };
        Ok(table)
    }
}

fn number(s: &str, line: usize) -> Result<f64, LibertyError> {
    s.trim().parse::<f64>().map_err(|_| LibertyError::Malformed {
        line,
        message: format!("`{s}` is not a number"),
    })
}

fn number_list(s: &str, line: usize) -> Result<Vec<f64>, LibertyError> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| number(x, line))
        .collect()
}

/// Parse unit strings like `"1ns"` or `"100ps"` against a suffix table.
fn unit_scale(v: &str, suffixes: &[(&str, f64)], line: usize) -> Result<f64, LibertyError> {
    for (suffix, factor) in suffixes {
        if let Some(num) = v.strip_suffix(suffix) {
            if let Ok(n) = num.trim().parse::<f64>() {
                return Ok(n * factor);
            }
        }
    }
    Err(LibertyError::Malformed {
        line,
        message: format!("unrecognized unit `{v}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixture_has_six_cells() {
        let lib = fixture_library();
        let names: Vec<&str> = lib.cells.keys().map(String::as_str).collect();
        assert_eq!(
            names,
            ["AND2_X1", "DFF_X1", "INV_X1", "MUX2_X1", "OR2_X1", "XOR2_X1"]
        );
        assert_eq!(lib.cell_attr("AND2_X1", &CellAttr::Area).unwrap(), 1.33);
        assert_eq!(lib.cell_attr("DFF_X1", &CellAttr::Area).unwrap(), 5.0);
        assert_eq!(
            lib.cell_attr("AND2_X1", &CellAttr::InputCap("A1".into())).unwrap(),
            1.0
        );
        assert_eq!(lib.cell_attr("DFF_X1", &CellAttr::Setup).unwrap(), 0.04);
        assert!(lib.cell("DFF_X1").unwrap().is_sequential);
        assert!(matches!(
            lib.cell_attr("AND2_X1", &CellAttr::Setup),
            Err(LibertyError::UnknownAttribute { .. })
        ));
        assert!(matches!(
            lib.cell_attr("NAND9", &CellAttr::Area),
            Err(LibertyError::UnknownCell(_))
        ));
        assert!(matches!(
            lib.cell_attr("INV_X1", &CellAttr::InputCap("Q".into())),
            Err(LibertyError::UnknownPin { .. })
        ));
        for cell in lib.cells.values() {
            assert_eq!(cell.leakage_uw, 0.01);
        }
    }

    #[test]
    fn rise_fall_collapse_to_max() {
        let lib = fixture_library();
        let inv = lib.cell("INV_X1").unwrap();
        // fixture fall tables are 0.9x the rise tables
        assert_eq!(inv.arcs[0].delay.at(0, 0), 0.05);
        assert_eq!(lib.cell_attr("DFF_X1", &CellAttr::ClkToQ).unwrap(), 0.1);
    }

    const SMALL: &str = r#"
    library (small) {
      time_unit : "1ns";
      capacitive_load_unit (1, ff);
      cell (BUF) {
        area : 1.33;
        pin (A) { direction : input; capacitance : 0.5; }
        pin (Z) {
          direction : output;
          timing () {
            related_pin : "A";
            cell_rise (t) {
              index_1 ("0.01, 0.1");
              index_2 ("1, 10");
              values ("1, 2", "3, 4");
            }
          }
        }
      }
    }"#;

    #[test]
    fn axes_stored_exactly() {
        let lib = Library::parse(SMALL).unwrap();
        let arc = &lib.cell("BUF").unwrap().arcs[0];
        assert_eq!(arc.delay.slew_axis, vec![0.01, 0.1]);
        assert_eq!(arc.delay.load_axis, vec![1.0, 10.0]);
        assert_eq!(lib.cell_attr("BUF", &CellAttr::Area).unwrap(), 1.33);
        // no slew table: slew passes through
        let (d, s) = lib.delay_of("BUF", 0.055, 5.5).unwrap();
        assert!((d - 2.5).abs() < 1e-12);
        assert_eq!(s, 0.055);
        // no explicit energy: 0.5 * 0.5 fF * 1 V^2
        assert_eq!(lib.cell_attr("BUF", &CellAttr::InternalEnergy).unwrap(), 0.25);
    }

    #[test]
    fn clamped_query_matches_hand_value() {
        let lib = fixture_library();
        // INV_X1 at load beyond 16 fF, slew 0.03: interpolate the last column between
        // 0.1275 (slew 0.01) and 0.1457 (slew 0.05)
        let (d, _) = lib.delay_of("INV_X1", 0.03, 40.0).unwrap();
        assert!((d - (0.1275 + 0.5 * (0.1457 - 0.1275))).abs() < 1e-12);
    }

    #[test]
    fn template_variable_order_is_honored() {
        let text = r#"library (t) {
          lu_table_template (lt) { variable_1 : total_output_net_capacitance; variable_2 : input_net_transition; }
          cell (B) { area : 1;
            pin (A) { direction : input; capacitance : 1; }
            pin (Z) { direction : output;
              timing () { related_pin : "A";
                cell_rise (lt) { index_1 ("1, 10"); index_2 ("0.01, 0.1"); values ("1, 3", "2, 4"); } } } } }"#;
        let lib = Library::parse(text).unwrap();
        let t = &lib.cell("B").unwrap().arcs[0].delay;
        assert_eq!(t.slew_axis, vec![0.01, 0.1]);
        assert_eq!(t.values, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn unit_conversion() {
        let text = r#"library (u) { time_unit : "1ps"; capacitive_load_unit (1, pf); leakage_power_unit : "1nW";
          cell (B) { area : 1; cell_leakage_power : 20;
            pin (A) { direction : input; capacitance : 0.002; }
            pin (Z) { direction : output; timing () { related_pin : "A";
                cell_rise (scalar) { values ("50"); } } } } }"#;
        let lib = Library::parse(text).unwrap();
        assert!((lib.cell_attr("B", &CellAttr::Leakage).unwrap() - 0.02).abs() < 1e-15);
        assert!((lib.cell_attr("B", &CellAttr::InputCap("A".into())).unwrap() - 2.0).abs() < 1e-12);
        assert!((lib.delay_of("B", 0.0, 0.0).unwrap().0 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn parse_errors_carry_location() {
        let missing_area = "library (x) {\n cell (B) {\n pin (A) { direction : input; capacitance : 1; }\n }\n}";
        assert!(matches!(
            Library::parse(missing_area),
            Err(LibertyError::MissingAttribute { line: 2, .. })
        ));
        let descending = SMALL.replace("\"1, 10\"", "\"10, 1\"");
        assert!(matches!(
            Library::parse(&descending),
            Err(LibertyError::NonAscendingAxis { .. })
        ));
        let unbalanced = SMALL.trim_end().trim_end_matches('}');
        assert!(matches!(
            Library::parse(unbalanced),
            Err(LibertyError::UnbalancedBraces { .. })
        ));
    }

    #[test]
    fn unknown_content_is_counted() {
        let text = SMALL.replace("area : 1.33;", "area : 1.33; cell_footprint : buf; test_cell () { }");
        let lib = Library::parse(&text).unwrap();
        assert!(lib.warnings >= 2);
    }

    #[test]
    fn print_parse_fixpoint() {
        let lib = fixture_library();
        let again = Library::parse(&lib.to_liberty()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let names: Vec<&String> = lib.cells.keys().collect();
        for _ in 0..100 {
            let cell = names[rng.gen_range(0..names.len())];
            let slew = rng.gen_range(0.0..0.3);
            let load = rng.gen_range(0.0..20.0);
            assert_eq!(
                lib.delay_of(cell, slew, load).unwrap(),
                again.delay_of(cell, slew, load).unwrap()
            );
            for attr in [CellAttr::Area, CellAttr::Leakage, CellAttr::InternalEnergy] {
                assert_eq!(
                    lib.cell_attr(cell, &attr).unwrap(),
                    again.cell_attr(cell, &attr).unwrap()
                );
            }
        }
        assert_eq!(
            lib.cell_attr("DFF_X1", &CellAttr::Setup),
            again.cell_attr("DFF_X1", &CellAttr::Setup)
        );
    }
}
