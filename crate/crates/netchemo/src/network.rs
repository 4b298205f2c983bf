//! Network description: arcs, nodes, transmission coefficients, and the
//! structural constraints the schemes assume.
//!
//! Arcs are parametrized as intervals `[0, L_i]` with a fixed artificial
//! orientation (`from_node` at x = 0, `to_node` at x = L). At a node p the
//! arcs whose `to_node` is p are *incoming* (set I_p), those whose
//! `from_node` is p are *outgoing* (set O_p). Cell transmission is governed
//! by the matrix ξ (row-stochastic, flux-compatible with the speeds λ) and
//! chemoattractant transmission by the symmetric Kedem-Katchalsky matrix κ.

use crate::error::{Error, Result};
use crate::grid::ArcGrid;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

/// Tolerance for the coefficient constraints; they are simple rationals,
/// so machine precision is expected.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Tolerance on `L/(2kλ)` deviating from an integer when deriving grids.
pub const GRID_TOL: f64 = 1e-9;

/// One oriented arc with its physics parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub id: u32,
    pub from_node: u32,
    pub to_node: u32,
    /// Length L_i > 0.
    pub length: f64,
    /// Characteristic speed λ_i > 0.
    pub lambda: f64,
    /// Chemoattractant diffusivity D_i > 0.
    pub diffusivity: f64,
    /// Production rate a_i ≥ 0.
    pub production: f64,
    /// Degradation rate b_i ≥ 0.
    pub degradation: f64,
    /// Chemotactic sensitivity χ_i (positive = attractive).
    pub chi: f64,
}

/// What happens at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// ≥ 2 arcs meet; transmission conditions apply.
    Internal,
    /// Outer node, zero flux for both u and φ.
    OuterNoflux,
    /// Outer node injecting cells, v = 2/(1+u), with prescribed ∂ₓφ.
    OuterInflowSource,
    /// Outer node at an arc end x = L, v = −2/(1+u), with prescribed ∂ₓφ.
    OuterInflowSink,
    /// Outer node with prescribed ∂ₓφ only; u keeps the no-flux condition.
    OuterPhiFlux,
}

impl NodeKind {
    pub fn is_outer(self) -> bool {
        !matches!(self, NodeKind::Internal)
    }
}

/// A node with its transmission coefficients. `incoming`/`outgoing` list
/// attached arc ids and are derived from the arc orientations; the ξ and κ
/// matrices are indexed over the attached arcs sorted by arc id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: u32,
    pub kind: NodeKind,
    pub incoming: Vec<u32>,
    pub outgoing: Vec<u32>,
    /// ξ_{i,j}: probability that a cell leaving arc i at this node enters
    /// arc j (turnabout j = i included). Row-major over attached arcs
    /// sorted by id.
    pub xi: Vec<Vec<f64>>,
    /// κ_{i,j}: Kedem-Katchalsky permeabilities, symmetric, zero diagonal.
    pub kappa: Vec<Vec<f64>>,
    /// Prescribed ∂ₓφ at an outer node (ignored at internal nodes).
    pub phi_flux: f64,
}

impl NodeSpec {
    /// Attached arc ids sorted ascending: the index base for ξ and κ.
    pub fn attached(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .incoming
            .iter()
            .chain(self.outgoing.iter())
            .copied()
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn degree(&self) -> usize {
        self.incoming.len() + self.outgoing.len()
    }
}

/// The whole graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub arcs: Vec<ArcSpec>,
    pub nodes: Vec<NodeSpec>,
}

/// One violated invariant, with the numeric residual where meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// `"arc"` or `"node"`.
    pub scope: String,
    pub id: u32,
    pub what: String,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} (residual {:.3e})",
            self.scope, self.id, self.what, self.residual
        )
    }
}

/// Validation never aborts; callers decide what to do with the findings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "network valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

impl NetworkSpec {
    /// Builds a network, deriving the per-node incidence sets from the arc
    /// orientations. `xi`/`kappa` entries of the given nodes may be empty,
    /// in which case uniform ξ and ones-off-diagonal κ are filled in.
    pub fn new(arcs: Vec<ArcSpec>, mut nodes: Vec<NodeSpec>) -> Result<Self> {
        let node_ids: HashSet<u32> = nodes.iter().map(|n| n.id).collect();
        if node_ids.len() != nodes.len() {
            return Err(Error::InvalidNetwork("duplicate node id".into()));
        }
        let mut arc_ids = HashSet::new();
        for a in &arcs {
            if !arc_ids.insert(a.id) {
                return Err(Error::InvalidNetwork(format!("duplicate arc id {}", a.id)));
            }
            for end in [a.from_node, a.to_node] {
                if !node_ids.contains(&end) {
                    return Err(Error::InvalidNetwork(format!(
                        "arc {} references missing node {end}",
                        a.id
                    )));
                }
            }
        }
        for n in &mut nodes {
            n.incoming = arcs
                .iter()
                .filter(|a| a.to_node == n.id)
                .map(|a| a.id)
                .collect();
            n.outgoing = arcs
                .iter()
                .filter(|a| a.from_node == n.id)
                .map(|a| a.id)
                .collect();
            n.incoming.sort_unstable();
            n.outgoing.sort_unstable();
            let deg = n.degree();
            if deg == 0 {
                return Err(Error::InvalidNetwork(format!("node {} has no arcs", n.id)));
            }
            if n.xi.is_empty() {
                *n = uniform_xi(n.clone());
            }
            if n.kappa.is_empty() {
                n.kappa = ones_offdiag(deg);
            }
        }
        Ok(NetworkSpec { arcs, nodes })
    }

    pub fn arc(&self, id: u32) -> Option<&ArcSpec> {
        self.arcs.iter().find(|a| a.id == id)
    }

    pub fn node(&self, id: u32) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Position of an arc id in `self.arcs`.
    pub fn arc_index(&self, id: u32) -> Option<usize> {
        self.arcs.iter().position(|a| a.id == id)
    }
}

/// κ with ones off the diagonal and zeros on it.
pub fn ones_offdiag(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect()
}

/// Equally distributed transmission coefficients: ξ_{i,j} = 1/N over the
/// N attached arcs, turnabout included. Satisfies both the row-sum and the
/// flux condition when the attached speeds are equal.
pub fn uniform_xi(mut node: NodeSpec) -> NodeSpec {
    let n = node.degree();
    node.xi = vec![vec![1.0 / n as f64; n]; n];
    node
}

/// Checks every structural invariant and reports each violation with its
/// numeric residual. Validity means all residuals ≤ 1e−12.
pub fn validate(net: &NetworkSpec) -> ValidationReport {
    let mut out = Vec::new();

    for a in &net.arcs {
        if !(a.length > 0.0) {
            out.push(Violation {
                scope: "arc".into(),
                id: a.id,
                what: format!("length must be positive, got {}", a.length),
                residual: -a.length,
            });
        }
        if !(a.lambda > 0.0) {
            out.push(Violation {
                scope: "arc".into(),
                id: a.id,
                what: format!("lambda must be positive, got {}", a.lambda),
                residual: -a.lambda,
            });
        }
        if !(a.diffusivity > 0.0) {
            out.push(Violation {
                scope: "arc".into(),
                id: a.id,
                what: format!("diffusivity must be positive, got {}", a.diffusivity),
                residual: -a.diffusivity,
            });
        }
        if a.from_node == a.to_node {
            out.push(Violation {
                scope: "arc".into(),
                id: a.id,
                what: format!("self-loop at node {}", a.from_node),
                residual: 0.0,
            });
        }
    }

    let lambda_of: HashMap<u32, f64> = net.arcs.iter().map(|a| (a.id, a.lambda)).collect();

    for node in &net.nodes {
        let attached = node.attached();
        let n = attached.len();
        if node.kind.is_outer() && n != 1 {
            out.push(Violation {
                scope: "node".into(),
                id: node.id,
                what: format!("outer node must have exactly one arc, has {n}"),
                residual: n as f64 - 1.0,
            });
        }
        if node.kind == NodeKind::Internal && n < 2 {
            out.push(Violation {
                scope: "node".into(),
                id: node.id,
                what: format!("internal node must join at least two arcs, has {n}"),
                residual: 2.0 - n as f64,
            });
        }
        if node.xi.len() != n || node.xi.iter().any(|row| row.len() != n) {
            out.push(Violation {
                scope: "node".into(),
                id: node.id,
                what: format!("xi must be {n}x{n}"),
                residual: 0.0,
            });
            continue;
        }
        if node.kappa.len() != n || node.kappa.iter().any(|row| row.len() != n) {
            out.push(Violation {
                scope: "node".into(),
                id: node.id,
                what: format!("kappa must be {n}x{n}"),
                residual: 0.0,
            });
            continue;
        }

        for (r, row) in node.xi.iter().enumerate() {
            for (c, &x) in row.iter().enumerate() {
                if !(0.0..=1.0 + VALIDATION_TOL).contains(&x) {
                    out.push(Violation {
                        scope: "node".into(),
                        id: node.id,
                        what: format!("xi[{r}][{c}] = {x} outside [0,1]"),
                        residual: if x < 0.0 { -x } else { x - 1.0 },
                    });
                }
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > VALIDATION_TOL {
                out.push(Violation {
                    scope: "node".into(),
                    id: node.id,
                    what: format!(
                        "xi row for arc {} sums to {s}, must be 1",
                        attached[r]
                    ),
                    residual: (s - 1.0).abs(),
                });
            }
        }
        // flux condition: Σ_i λ_i ξ_{i,j} = λ_j for every column j
        for (c, &arc_j) in attached.iter().enumerate() {
            let lam_j = lambda_of.get(&arc_j).copied().unwrap_or(f64::NAN);
            let s: f64 = attached
                .iter()
                .enumerate()
                .map(|(r, &arc_i)| lambda_of.get(&arc_i).copied().unwrap_or(f64::NAN) * node.xi[r][c])
                .sum();
            if (s - lam_j).abs() > VALIDATION_TOL * lam_j.abs().max(1.0) {
                out.push(Violation {
                    scope: "node".into(),
                    id: node.id,
                    what: format!(
                        "flux condition fails for arc {arc_j}: \u{3a3} \u{3bb}_i \u{3be}_i,{c} = {s}, expected {lam_j}"
                    ),
                    residual: (s - lam_j).abs(),
                });
            }
        }

        for r in 0..n {
            if node.kappa[r][r].abs() > VALIDATION_TOL {
                out.push(Violation {
                    scope: "node".into(),
                    id: node.id,
                    what: format!("kappa diagonal entry [{r}][{r}] must be 0"),
                    residual: node.kappa[r][r].abs(),
                });
            }
            for c in 0..n {
                if node.kappa[r][c] < -VALIDATION_TOL {
                    out.push(Violation {
                        scope: "node".into(),
                        id: node.id,
                        what: format!("kappa[{r}][{c}] = {} negative", node.kappa[r][c]),
                        residual: -node.kappa[r][c],
                    });
                }
                let asym = (node.kappa[r][c] - node.kappa[c][r]).abs();
                if asym > VALIDATION_TOL {
                    out.push(Violation {
                        scope: "node".into(),
                        id: node.id,
                        what: format!("kappa not symmetric at [{r}][{c}]"),
                        residual: asym,
                    });
                }
            }
        }
    }

    // connectivity over the undirected incidence graph
    if !net.arcs.is_empty() {
        let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
        for a in &net.arcs {
            adj.entry(a.from_node).or_default().push(a.to_node);
            adj.entry(a.to_node).or_default().push(a.from_node);
        }
        let start = net.nodes[0].id;
        let mut seen = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in adj.get(&p).into_iter().flatten() {
                if seen.insert(q) {
                    queue.push_back(q);
                }
            }
        }
        for node in &net.nodes {
            if !seen.contains(&node.id) {
                out.push(Violation {
                    scope: "node".into(),
                    id: node.id,
                    what: "not connected to the rest of the network".into(),
                    residual: 0.0,
                });
            }
        }
    }

    ValidationReport { violations: out }
}

/// Derives the per-arc grids from the shared time step via the consistency
/// condition `h_i = 2 k λ_i`: the cell count follows from
/// `L_i = (M_i + 1) h_i` and must come out integral.
pub fn build_grids(net: &NetworkSpec, k: f64) -> Result<Vec<ArcGrid>> {
    assert!(k > 0.0, "time step must be positive");
    net.arcs
        .iter()
        .map(|a| {
            let h = 2.0 * k * a.lambda;
            let ratio = a.length / h;
            let cells = ratio.round();
            if (ratio - cells).abs() > GRID_TOL * ratio.max(1.0) || cells < 2.0 {
                return Err(Error::IncompatibleGrid {
                    arc: a.id,
                    ratio,
                    deviation: (ratio - cells).abs(),
                });
            }
            Ok(ArcGrid {
                h,
                k,
                m: cells as usize - 1,
            })
        })
        .collect()
}

/// Largest time step `k ≤ k_max` for which every arc gets an integral cell
/// count (and at least two cells). Returns `None` when the arc lengths have
/// no common divisor detectable at the grid tolerance.
pub fn suggest_time_step(net: &NetworkSpec, k_max: f64) -> Option<f64> {
    assert!(k_max > 0.0);
    // L_i/(2 λ_i) is the k that gives one cell on arc i; any valid k must
    // divide all of them.
    let cs: Vec<f64> = net
        .arcs
        .iter()
        .map(|a| a.length / (2.0 * a.lambda))
        .collect();
    let mut g = cs[0];
    for &c in &cs[1..] {
        g = float_gcd(g, c)?;
    }
    let cap = cs
        .iter()
        .fold(k_max, |acc, &c| acc.min(c / 2.0));
    let m = (g / cap).ceil().max(1.0);
    let k = g / m;
    build_grids(net, k).ok().map(|_| k)
}

fn float_gcd(a: f64, b: f64) -> Option<f64> {
    let (mut a, mut b) = (a.abs(), b.abs());
    let tol = 1e-9 * a.max(b);
    for _ in 0..128 {
        if b < tol {
            return Some(a);
        }
        let r = a % b;
        // snap near-multiples to zero
        let r = if r < tol || (b - r) < tol { 0.0 } else { r };
        a = b;
        b = r;
    }
    None
}
