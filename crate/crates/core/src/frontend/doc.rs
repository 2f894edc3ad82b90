// SPDX-License-Identifier: Apache-2.0

//! Serde mirror of the canonical netlist document.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetlistDoc {
    pub name: String,
    pub clock_period_ns: f64,
    pub ports: Vec<PortDoc>,
    #[serde(default)]
    pub nets: Vec<NetDoc>,
    #[serde(default)]
    pub nodes: Vec<NodeDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortDoc {
    pub name: String,
    pub dir: String,
    pub width: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetDoc {
    pub name: String,
    pub width: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub kind: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub output: String,
    #[serde(default, skip_serializing_if = "ParamsDoc::is_empty")]
    pub params: ParamsDoc,
}

/// Kind-specific parameters. Only the fields relevant to a node's kind may be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    /// CONST value as a decimal string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// CONST width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    /// SHL/SHR constant amount.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<u32>,
    /// REG enable net (1 bit).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enable: Option<String>,
}

impl ParamsDoc {
    pub fn is_empty(&self) -> bool {
        *self == ParamsDoc::default()
    }
}
