//! Boundary and node closures: the values the interior stencil cannot
//! reach, filled so that the discrete total mass obeys the exact ledger.
//!
//! Per step the order is fixed: (1) interior update on all arcs, (2) outer
//! closures (no-flux pairing or the rational inflow root), (3) the δ-weighted
//! node update for the components leaving each internal node, (4) the
//! transmission relations at the new time level for the components entering
//! the arcs.

use crate::error::{Error, Result};
use crate::grid::ArcGrid;
use crate::hyperbolic::AhoCoeffs;
use crate::state::ArcState;

/// Which end of an arc a closure applies to: `Left` is the x = 0 end,
/// `Right` the x = L end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Common boundary value for a no-flux outer end: the interior AHO stencil
/// evaluated at the boundary index, assigned to both u⁺ and u⁻ (v = 0).
/// Derived from exact mass conservation between two successive steps; the
/// boundary source values f^0 / f^{M+1} are included (they vanish
/// identically under a homogeneous Neumann φ).
pub fn outer_noflux_update(prev: &ArcState, grid: &ArcGrid, lambda: f64, side: Side) -> f64 {
    let AhoCoeffs { a, b, c, d } = AhoCoeffs::new(grid, lambda);
    let m = grid.m;
    let (up, um, f) = (&prev.u_plus, &prev.u_minus, &prev.f);
    match side {
        Side::Left => a * um[0] + b * um[1] + c * (up[0] + up[1]) - d * (f[1] + f[0]),
        Side::Right => {
            a * up[m + 1] + b * up[m] + c * (um[m + 1] + um[m]) + d * (f[m] + f[m + 1])
        }
    }
}

/// Coefficients of the boundary quadratic at an inflow end.
///
/// The rational flux condition v = ±2/(1+u) discretized with the trapezoidal
/// mass ledger reduces to `α₁ u² + β₁ u + γ₁ = 0` for the total boundary
/// density u at the new time level, with `α₁ = h/k`, `β₁ = α₁ + Aⁿ`,
/// `γ₁ = Aⁿ − 2`; Aⁿ collects the time-n data of the boundary cell.
#[derive(Debug, Clone, Copy)]
pub struct InflowWorkspace {
    pub alpha1: f64,
    pub a_n: f64,
    pub beta1: f64,
    pub gamma1: f64,
}

impl InflowWorkspace {
    fn from_a(alpha1: f64, a_n: f64) -> Self {
        InflowWorkspace {
            alpha1,
            a_n,
            beta1: alpha1 + a_n,
            gamma1: a_n - 2.0,
        }
    }

    /// Aⁿ at a source end (x = 0), from time-n data.
    pub fn source(prev: &ArcState, grid: &ArcGrid, lambda: f64) -> Self {
        let (h, k) = (grid.h, grid.k);
        let (up, um, f) = (&prev.u_plus, &prev.u_minus, &prev.f);
        let u0 = up[0] + um[0];
        let a_n = -2.0 / (1.0 + u0)
            + h * (-(u0) / k
                + (2.0 * lambda / h - 0.5) * up[0]
                + 0.5 * um[0]
                - 0.5 * up[1]
                - (2.0 * lambda / h - 0.5) * um[1]
                + (0.5 * f[1] + 0.5 * f[0]) / lambda);
        Self::from_a(h / k, a_n)
    }

    /// Aⁿ at a sink end (x = L): the source formula under x → L − x,
    /// u⁺ ↔ u⁻, f → −f.
    pub fn sink(prev: &ArcState, grid: &ArcGrid, lambda: f64) -> Self {
        let (h, k) = (grid.h, grid.k);
        let m = grid.m;
        let (up, um, f) = (&prev.u_plus, &prev.u_minus, &prev.f);
        let u_end = up[m + 1] + um[m + 1];
        let a_n = -2.0 / (1.0 + u_end)
            + h * (-(u_end) / k
                + 0.5 * up[m + 1]
                + (2.0 * lambda / h - 0.5) * um[m + 1]
                - (2.0 * lambda / h - 0.5) * up[m]
                - 0.5 * um[m]
                - (0.5 * f[m + 1] + 0.5 * f[m]) / lambda);
        Self::from_a(h / k, a_n)
    }

    fn discriminant_with(&self, w: f64) -> f64 {
        let bq = self.beta1 + 2.0 * self.alpha1 * w;
        bq * bq
            - 4.0 * self.alpha1
                * (self.gamma1 + w * (self.a_n + self.alpha1) + self.alpha1 * w * w)
    }
}

/// Positive root of the boundary quadratic: given the already-computed other
/// component `w` at the boundary (u⁻ at a source, u⁺ at a sink), returns the
/// missing component, `g(w) = (−β₁ − 2α₁w + √Δ)/(2α₁)`.
pub fn inflow_root(ws: &InflowWorkspace, w: f64) -> Result<f64> {
    let disc = ws.discriminant_with(w);
    if !disc.is_finite() || disc < 0.0 {
        return Err(Error::BlowUp {
            t: f64::NAN,
            detail: format!("inflow closure discriminant {disc} < 0"),
        });
    }
    let root = (-ws.beta1 - 2.0 * ws.alpha1 * w + disc.sqrt()) / (2.0 * ws.alpha1);
    if !root.is_finite() {
        return Err(Error::BlowUp {
            t: f64::NAN,
            detail: "inflow closure produced a non-finite value".into(),
        });
    }
    Ok(root)
}

/// Source closure at x = 0: returns the new u⁺ from the new u⁻.
pub fn inflow_root_source(ws: &InflowWorkspace, u_minus_new: f64) -> Result<f64> {
    inflow_root(ws, u_minus_new)
}

/// Sink closure at x = M+1: returns the new u⁻ from the new u⁺.
pub fn inflow_root_sink(ws: &InflowWorkspace, u_plus_new: f64) -> Result<f64> {
    inflow_root(ws, u_plus_new)
}

/// Full source-end closure: u⁻ at j = 0 comes from the interior stencil
/// (already written into `next`), u⁺ from the quadratic root; returns the
/// imposed boundary flux v^{n+1,0} = 2/(1 + u^{n+1,0}).
pub fn inflow_boundary_step_source(
    prev: &ArcState,
    next: &mut ArcState,
    grid: &ArcGrid,
    lambda: f64,
) -> Result<f64> {
    let ws = InflowWorkspace::source(prev, grid, lambda);
    let um_new = next.u_minus[0];
    next.u_plus[0] = inflow_root_source(&ws, um_new)?;
    Ok(2.0 / (1.0 + next.u_plus[0] + next.u_minus[0]))
}

/// Full sink-end closure at x = L; v^{n+1,M+1} = −2/(1 + u^{n+1,M+1}).
pub fn inflow_boundary_step_sink(
    prev: &ArcState,
    next: &mut ArcState,
    grid: &ArcGrid,
    lambda: f64,
) -> Result<f64> {
    let ws = InflowWorkspace::sink(prev, grid, lambda);
    let m = grid.m;
    let up_new = next.u_plus[m + 1];
    next.u_minus[m + 1] = inflow_root_sink(&ws, up_new)?;
    Ok(-2.0 / (1.0 + next.u_plus[m + 1] + next.u_minus[m + 1]))
}

/// One arc's attachment to an internal node.
#[derive(Debug, Clone)]
pub struct NodeMember {
    /// Index into the network's arc list.
    pub arc: usize,
    /// True when the arc ends here (x = L, set I_p); false when it starts
    /// here (x = 0, set O_p).
    pub incoming: bool,
    /// δ_i = h_i (h_i + Σ_j h_j ξ_{j,i})⁻¹.
    pub delta: f64,
}

/// Prebuilt closure data for one internal node.
#[derive(Debug, Clone)]
pub struct NodeClosure {
    pub node_id: u32,
    pub members: Vec<NodeMember>,
    /// ξ over the members, same order.
    pub xi: Vec<Vec<f64>>,
}

impl NodeClosure {
    /// `arcs_sorted` are the attached arc indices with their orientation,
    /// in the node's ξ index order.
    pub fn new(
        node_id: u32,
        arcs_sorted: &[(usize, bool)],
        xi: Vec<Vec<f64>>,
        grids: &[ArcGrid],
    ) -> Self {
        let members = arcs_sorted
            .iter()
            .enumerate()
            .map(|(col, &(arc, incoming))| {
                let h_i = grids[arc].h;
                let coupling: f64 = arcs_sorted
                    .iter()
                    .enumerate()
                    .map(|(row, &(other, _))| grids[other].h * xi[row][col])
                    .sum();
                NodeMember {
                    arc,
                    incoming,
                    delta: h_i / (h_i + coupling),
                }
            })
            .collect();
        NodeClosure {
            node_id,
            members,
            xi,
        }
    }
}

/// The two-stage update at one internal node. First the δ-weighted closure
/// fills the component leaving the node on each arc (u⁺ at the head of an
/// incoming arc, u⁻ at the tail of an outgoing one); then the transmission
/// relations at the new time level fill the component entering each arc.
pub fn internal_node_update(
    closure: &NodeClosure,
    prev: &[ArcState],
    next: &mut [ArcState],
    grids: &[ArcGrid],
    lambdas: &[f64],
) {
    let n = closure.members.len();
    let mut z = vec![0.0; n];
    for (idx, mem) in closure.members.iter().enumerate() {
        let s = &prev[mem.arc];
        let g = &grids[mem.arc];
        let lam = lambdas[mem.arc];
        let (h, k) = (g.h, g.k);
        let m = g.m;
        z[idx] = if mem.incoming {
            mem.delta
                * (s.u_plus[m + 1] * (1.0 - 0.5 * k)
                    + s.u_minus[m + 1] * (1.0 - 2.0 * k * lam / h + 0.5 * k)
                    + k * s.u_plus[m] * (2.0 * lam / h - 0.5)
                    + 0.5 * k * s.u_minus[m]
                    + (k / lam) * 0.5 * (s.f[m + 1] + s.f[m]))
        } else {
            mem.delta
                * (s.u_plus[0] * (1.0 - 2.0 * k * lam / h + 0.5 * k)
                    + s.u_minus[0] * (1.0 - 0.5 * k)
                    + 0.5 * k * s.u_plus[1]
                    + k * s.u_minus[1] * (2.0 * lam / h - 0.5)
                    - (k / lam) * 0.5 * (s.f[1] + s.f[0]))
        };
    }
    for (idx, mem) in closure.members.iter().enumerate() {
        let m = grids[mem.arc].m;
        if mem.incoming {
            next[mem.arc].u_plus[m + 1] = z[idx];
        } else {
            next[mem.arc].u_minus[0] = z[idx];
        }
    }
    // transmission at t_{n+1}
    for (idx, mem) in closure.members.iter().enumerate() {
        let val: f64 = closure.xi[idx]
            .iter()
            .zip(&z)
            .map(|(xi, zj)| xi * zj)
            .sum();
        let m = grids[mem.arc].m;
        if mem.incoming {
            next[mem.arc].u_minus[m + 1] = val;
        } else {
            next[mem.arc].u_plus[0] = val;
        }
    }
}
