//! Per-arc and per-network state containers and the discrete mass.

use crate::grid::ArcGrid;

/// Field arrays on one arc at a single time level, all of length M+2.
///
/// `u_plus`/`u_minus` are the Riemann invariants (cells moving with/against
/// the arc orientation); `phi` the chemoattractant, `phi_x` its recovered
/// derivative and `f = χ φₓ (u⁺ + u⁻)` the chemotactic source.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcState {
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_x: Vec<f64>,
    pub f: Vec<f64>,
}

impl ArcState {
    pub fn zeros(n_points: usize) -> Self {
        ArcState {
            u_plus: vec![0.0; n_points],
            u_minus: vec![0.0; n_points],
            phi: vec![0.0; n_points],
            phi_x: vec![0.0; n_points],
            f: vec![0.0; n_points],
        }
    }

    pub fn n_points(&self) -> usize {
        self.u_plus.len()
    }

    /// Total density u = u⁺ + u⁻ at point j.
    pub fn u(&self, j: usize) -> f64 {
        self.u_plus[j] + self.u_minus[j]
    }
}

/// Network state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    /// One state per arc, in `NetworkSpec::arcs` order.
    pub arcs: Vec<ArcState>,
    pub t: f64,
    pub step: usize,
}

/// Per-step bookkeeping: the discrete mass, node flux residuals, boundary
/// fluxes and the monotonicity flags.
#[derive(Debug, Clone, Default)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// Trapezoidal mass per arc, `NetworkSpec::arcs` order.
    pub per_arc_mass: Vec<f64>,
    pub total_mass: f64,
    /// Residual of the node flux conservation at each internal node.
    pub node_flux_residuals: Vec<(u32, f64)>,
    /// Boundary flux value v at each outer node (the imposed boundary value).
    pub boundary_fluxes: Vec<(u32, f64)>,
    /// Trapezoidal inflow ledger for this step:
    /// (k/2) Σ (v_source^n + v_source^{n+1}) − (k/2) Σ (v_sink^n + v_sink^{n+1}).
    pub inflow_mass_increment: f64,
    /// Gradient-bound violations at inflow ends, `(arc id, residual)`.
    pub monotonicity_flags: Vec<(u32, f64)>,
    pub max_abs_state: f64,
    /// ‖Aφ − b‖∞ of the parabolic solve.
    pub phi_residual: f64,
}

/// Trapezoidal discrete mass per arc and in total:
/// `𝓘_i = h_i (u^0/2 + Σ_{j=1..M} u^j + u^{M+1}/2)` with u = u⁺ + u⁻.
pub fn trapezoidal_mass(arcs: &[ArcState], grids: &[ArcGrid]) -> (Vec<f64>, f64) {
    let per: Vec<f64> = arcs
        .iter()
        .zip(grids)
        .map(|(s, g)| {
            let m = g.m;
            let mut sum = 0.5 * (s.u(0) + s.u(m + 1));
            for j in 1..=m {
                sum += s.u(j);
            }
            g.h * sum
        })
        .collect();
    let total = per.iter().sum();
    (per, total)
}
