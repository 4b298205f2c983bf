//! External JSON schema for network descriptions, and the conversion to and
//! from the in-memory `NetworkSpec`.
//!
//! Arcs carry `(id, from, to, length, lambda, D, a, b, chi)`; nodes carry
//! `(id, kind, xi, kappa, phi_flux)` where `xi` is either the string
//! `"uniform"` or an explicit row-major matrix over the attached arcs in
//! ascending arc-id order, and `kappa` is `"ones-offdiag"` or explicit.

use crate::error::{Error, Result};
use crate::network::{ones_offdiag, ArcSpec, NetworkSpec, NodeKind, NodeSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcConfig {
    pub id: u32,
    pub from: u32,
    pub to: u32,
    pub length: f64,
    pub lambda: f64,
    #[serde(rename = "D")]
    pub diffusivity: f64,
    pub a: f64,
    pub b: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Explicit(Vec<Vec<f64>>),
}

fn uniform_name() -> MatrixSpec {
    MatrixSpec::Named("uniform".into())
}

fn ones_offdiag_name() -> MatrixSpec {
    MatrixSpec::Named("ones-offdiag".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: u32,
    pub kind: NodeKind,
    #[serde(default = "uniform_name")]
    pub xi: MatrixSpec,
    #[serde(default = "ones_offdiag_name")]
    pub kappa: MatrixSpec,
    #[serde(default)]
    pub phi_flux: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub arcs: Vec<ArcConfig>,
    pub nodes: Vec<NodeConfig>,
    /// Set on shipped configs whose node-arc incidence was reconstructed
    /// from a figure rather than stated in a table.
    #[serde(default)]
    pub reconstructed_topology: bool,
}

impl NetworkConfig {
    pub fn to_network(&self) -> Result<NetworkSpec> {
        let arcs: Vec<ArcSpec> = self
            .arcs
            .iter()
            .map(|a| ArcSpec {
                id: a.id,
                from_node: a.from,
                to_node: a.to,
                length: a.length,
                lambda: a.lambda,
                diffusivity: a.diffusivity,
                production: a.a,
                degradation: a.b,
                chi: a.chi,
            })
            .collect();
        let nodes: Vec<NodeSpec> = self
            .nodes
            .iter()
            .map(|n| {
                let degree = arcs
                    .iter()
                    .filter(|a| a.from_node == n.id || a.to_node == n.id)
                    .count();
                let xi = match &n.xi {
                    MatrixSpec::Named(s) if s == "uniform" => vec![],
                    MatrixSpec::Named(s) => {
                        return Err(Error::Config(format!(
                            "node {}: unknown xi spec `{s}` (use \"uniform\" or a matrix)",
                            n.id
                        )))
                    }
                    MatrixSpec::Explicit(m) => m.clone(),
                };
                let kappa = match &n.kappa {
                    MatrixSpec::Named(s) if s == "ones-offdiag" => ones_offdiag(degree),
                    MatrixSpec::Named(s) => {
                        return Err(Error::Config(format!(
                            "node {}: unknown kappa spec `{s}` (use \"ones-offdiag\" or a matrix)",
                            n.id
                        )))
                    }
                    MatrixSpec::Explicit(m) => m.clone(),
                };
                Ok(NodeSpec {
                    id: n.id,
                    kind: n.kind,
                    incoming: vec![],
                    outgoing: vec![],
                    xi,
                    kappa,
                    phi_flux: n.phi_flux,
                })
            })
            .collect::<Result<_>>()?;
        NetworkSpec::new(arcs, nodes)
    }

    /// Lossless export: matrices written explicitly.
    pub fn from_network(net: &NetworkSpec) -> Self {
        NetworkConfig {
            arcs: net
                .arcs
                .iter()
                .map(|a| ArcConfig {
                    id: a.id,
                    from: a.from_node,
                    to: a.to_node,
                    length: a.length,
                    lambda: a.lambda,
                    diffusivity: a.diffusivity,
                    a: a.production,
                    b: a.degradation,
                    chi: a.chi,
                })
                .collect(),
            nodes: net
                .nodes
                .iter()
                .map(|n| NodeConfig {
                    id: n.id,
                    kind: n.kind,
                    xi: MatrixSpec::Explicit(n.xi.clone()),
                    kappa: MatrixSpec::Explicit(n.kappa.clone()),
                    phi_flux: n.phi_flux,
                })
                .collect(),
            reconstructed_topology: false,
        }
    }
}

pub fn parse_network_config(text: &str) -> Result<NetworkConfig> {
    Ok(serde_json::from_str(text)?)
}
