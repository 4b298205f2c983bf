//! Per-step pipeline and run loop: interior hyperbolic update, boundary and
//! node closures, parabolic solve, source refresh, diagnostics, blow-up and
//! stationarity detection.

use crate::coupling::{
    inflow_boundary_step_sink, inflow_boundary_step_source, internal_node_update,
    outer_noflux_update, NodeClosure, Side,
};
use crate::error::{Error, Result};
use crate::grid::ArcGrid;
use crate::hyperbolic::{aho_interior_step, check_monotonicity, MonotonicityCondition};
use crate::network::{NetworkSpec, NodeKind};
use crate::parabolic::{compute_f, recover_phi_x, PhiSolver};
use crate::state::{trapezoidal_mass, ArcState, NetState, StepDiagnostics};
use rayon::prelude::*;
use std::sync::OnceLock;

/// Worker pool sized by `NETCHEMO_THREADS` (0 or unset = automatic).
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = std::env::var("NETCHEMO_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("failed to build worker pool")
    })
}

/// Knobs with paper-independent defaults.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// |u| beyond this is declared blow-up.
    pub blowup_cap: f64,
    /// Stationarity when max|Δ(u⁺,u⁻)|/k stays below this...
    pub stationarity_tol: f64,
    /// ...for this many consecutive steps.
    pub stationarity_dwell: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            blowup_cap: 1e8,
            stationarity_tol: 1e-9,
            stationarity_dwell: 10,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    TEnd,
    Stationary,
    BlowUp,
}

/// One arc end attached to an outer node, with its resolved condition.
#[derive(Debug, Clone, Copy)]
struct OuterEnd {
    arc: usize,
    side: Side,
    kind: NodeKind,
    node_id: u32,
}

/// The engine: immutable network data plus the factored parabolic solver.
pub struct Simulator {
    pub net: NetworkSpec,
    pub grids: Vec<ArcGrid>,
    pub options: SimOptions,
    lambdas: Vec<f64>,
    chis: Vec<f64>,
    closures: Vec<NodeClosure>,
    outer_ends: Vec<OuterEnd>,
    phi: PhiSolver,
}

impl Simulator {
    /// Builds the engine; checks the static monotonicity conditions and
    /// returns the violated ones as warnings `(arc id, condition)`.
    pub fn new(net: NetworkSpec, grids: Vec<ArcGrid>, options: SimOptions) -> Result<Self> {
        if grids.len() != net.arcs.len() {
            return Err(Error::Assembly("grid/arc count mismatch".into()));
        }
        let lambdas: Vec<f64> = net.arcs.iter().map(|a| a.lambda).collect();
        let chis: Vec<f64> = net.arcs.iter().map(|a| a.chi).collect();

        let mut closures = Vec::new();
        let mut outer_ends = Vec::new();
        for node in &net.nodes {
            let members: Vec<(usize, bool)> = node
                .attached()
                .iter()
                .map(|&id| {
                    let ai = net
                        .arc_index(id)
                        .ok_or_else(|| Error::InvalidNetwork(format!("missing arc {id}")))?;
                    Ok((ai, net.arcs[ai].to_node == node.id))
                })
                .collect::<Result<_>>()?;
            if node.kind == NodeKind::Internal {
                closures.push(NodeClosure::new(node.id, &members, node.xi.clone(), &grids));
            } else {
                let (arc, incoming) = members[0];
                outer_ends.push(OuterEnd {
                    arc,
                    side: if incoming { Side::Right } else { Side::Left },
                    kind: node.kind,
                    node_id: node.id,
                });
            }
        }
        let phi = PhiSolver::new(&net, &grids)?;
        Ok(Simulator {
            net,
            grids,
            options,
            lambdas,
            chis,
            closures,
            outer_ends,
            phi,
        })
    }

    /// Static monotonicity findings per arc (gradient bound not included).
    pub fn static_monotonicity_warnings(&self) -> Vec<(u32, MonotonicityCondition)> {
        let mut out = Vec::new();
        for (i, g) in self.grids.iter().enumerate() {
            for v in check_monotonicity(g, self.lambdas[i], 0.0, 0.0) {
                out.push((self.net.arcs[i].id, v.condition));
            }
        }
        out
    }

    pub fn time_step(&self) -> f64 {
        self.grids[0].k
    }

    /// The imposed boundary flux value at an outer end for a given state.
    fn boundary_flux(&self, end: &OuterEnd, state: &NetState) -> f64 {
        let s = &state.arcs[end.arc];
        let m = self.grids[end.arc].m;
        match (end.kind, end.side) {
            (NodeKind::OuterInflowSource, Side::Left) => 2.0 / (1.0 + s.u(0)),
            (NodeKind::OuterInflowSink, Side::Right) => -2.0 / (1.0 + s.u(m + 1)),
            _ => 0.0,
        }
    }

    /// Advances one time level. The pipeline order is fixed: interior AHO,
    /// outer closures, node closures, parabolic solve, source refresh.
    pub fn step(&self, prev: &NetState) -> Result<(NetState, StepDiagnostics)> {
        let k = self.time_step();
        let mut next = prev.clone();
        next.step = prev.step + 1;
        next.t = next.step as f64 * k;

        // (1) interior update, arcs independent
        thread_pool().install(|| {
            next.arcs
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, arc_next)| {
                    aho_interior_step(&prev.arcs[i], arc_next, &self.grids[i], self.lambdas[i]);
                });
        });

        // (2) outer closures
        let mut boundary_fluxes = Vec::with_capacity(self.outer_ends.len());
        let mut inflow_increment = 0.0;
        let mut monotonicity_flags = Vec::new();
        for end in &self.outer_ends {
            let g = &self.grids[end.arc];
            let lam = self.lambdas[end.arc];
            let prev_arc = &prev.arcs[end.arc];
            let v_new = match (end.kind, end.side) {
                (NodeKind::OuterInflowSource, Side::Left) => {
                    let v = inflow_boundary_step_source(
                        prev_arc,
                        &mut next.arcs[end.arc],
                        g,
                        lam,
                    )
                    .map_err(|e| at_time(e, prev.t))?;
                    let v_old = self.boundary_flux(end, prev);
                    inflow_increment += 0.5 * k * (v_old + v);
                    v
                }
                (NodeKind::OuterInflowSink, Side::Right) => {
                    let v = inflow_boundary_step_sink(
                        prev_arc,
                        &mut next.arcs[end.arc],
                        g,
                        lam,
                    )
                    .map_err(|e| at_time(e, prev.t))?;
                    let v_old = self.boundary_flux(end, prev);
                    inflow_increment -= 0.5 * k * (v_old + v);
                    v
                }
                _ => {
                    // u no-flux at this end, whatever φ does
                    let val = outer_noflux_update(prev_arc, g, lam, end.side);
                    let m = g.m;
                    match end.side {
                        Side::Left => {
                            next.arcs[end.arc].u_plus[0] = val;
                            next.arcs[end.arc].u_minus[0] = val;
                        }
                        Side::Right => {
                            next.arcs[end.arc].u_plus[m + 1] = val;
                            next.arcs[end.arc].u_minus[m + 1] = val;
                        }
                    }
                    0.0
                }
            };
            boundary_fluxes.push((end.node_id, v_new));

            // gradient-bound check at inflow-adjacent points, time-n data
            if matches!(
                end.kind,
                NodeKind::OuterInflowSource | NodeKind::OuterInflowSink
            ) {
                let m = g.m;
                let px = &prev_arc.phi_x;
                let seen = match end.side {
                    Side::Left => px[0].max(px[1]),
                    Side::Right => (-px[m + 1]).max(-px[m]),
                };
                for v in check_monotonicity(g, lam, seen, self.chis[end.arc]) {
                    if v.condition == MonotonicityCondition::GradientBound {
                        monotonicity_flags.push((self.net.arcs[end.arc].id, v.residual));
                    }
                }
            }
        }

        // (3) internal nodes: δ-closure then transmission at t_{n+1}
        for cl in &self.closures {
            internal_node_update(cl, &prev.arcs, &mut next.arcs, &self.grids, &self.lambdas);
        }

        // (4) parabolic advance and (5) source refresh
        let (phi_new, phi_residual) = self
            .phi
            .step(&prev.arcs, &next.arcs)
            .map_err(|e| at_time(e, prev.t))?;
        thread_pool().install(|| {
            next.arcs
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, arc_next)| {
                    arc_next.phi = phi_new[i].clone();
                    arc_next.phi_x = recover_phi_x(&arc_next.phi, self.grids[i].h);
                    arc_next.f = compute_f(
                        &arc_next.u_plus,
                        &arc_next.u_minus,
                        &arc_next.phi_x,
                        self.chis[i],
                    );
                });
        });

        // diagnostics and blow-up scan
        let (per_arc_mass, total_mass) = trapezoidal_mass(&next.arcs, &self.grids);
        let mut max_abs: f64 = 0.0;
        for s in &next.arcs {
            for arr in [&s.u_plus, &s.u_minus, &s.phi] {
                for &v in arr.iter() {
                    if !v.is_finite() {
                        return Err(Error::BlowUp {
                            t: next.t,
                            detail: "non-finite state value".into(),
                        });
                    }
                    max_abs = max_abs.max(v.abs());
                }
            }
        }
        if max_abs > self.options.blowup_cap {
            return Err(Error::BlowUp {
                t: next.t,
                detail: format!("|state| = {max_abs:.3e} exceeds cap {:.1e}", self.options.blowup_cap),
            });
        }

        let node_flux_residuals = self
            .closures
            .iter()
            .map(|cl| {
                let mut r = 0.0;
                for mem in &cl.members {
                    let s = &next.arcs[mem.arc];
                    let m = self.grids[mem.arc].m;
                    let lam = self.lambdas[mem.arc];
                    if mem.incoming {
                        r += lam * (s.u_plus[m + 1] - s.u_minus[m + 1]);
                    } else {
                        r -= lam * (s.u_plus[0] - s.u_minus[0]);
                    }
                }
                (cl.node_id, r)
            })
            .collect();

        let diag = StepDiagnostics {
            step: next.step,
            t: next.t,
            per_arc_mass,
            total_mass,
            node_flux_residuals,
            boundary_fluxes,
            inflow_mass_increment: inflow_increment,
            monotonicity_flags,
            max_abs_state: max_abs,
            phi_residual,
        };
        Ok((next, diag))
    }
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::BlowUp { detail, .. } => Error::BlowUp { t, detail },
        other => other,
    }
}

/// Largest change rate max|Δ(u⁺,u⁻)|∞ / k between two levels; φ is excluded
/// because its spatially uniform mode keeps drifting long after the cell
/// densities and fluxes are stationary.
pub fn hyperbolic_change_rate(a: &NetState, b: &NetState, k: f64) -> f64 {
    let mut d: f64 = 0.0;
    for (sa, sb) in a.arcs.iter().zip(&b.arcs) {
        for (x, y) in sa.u_plus.iter().zip(&sb.u_plus) {
            d = d.max((x - y).abs());
        }
        for (x, y) in sa.u_minus.iter().zip(&sb.u_minus) {
            d = d.max((x - y).abs());
        }
    }
    d / k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ArcSpec, NodeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arc(id: u32, from: u32, to: u32, length: f64, lambda: f64) -> ArcSpec {
        ArcSpec {
            id,
            from_node: from,
            to_node: to,
            length,
            lambda,
            diffusivity: 1.0,
            production: 1.0,
            degradation: 0.1,
            chi: 1.0,
        }
    }

    fn node(id: u32, kind: NodeKind) -> NodeSpec {
        NodeSpec {
            id,
            kind,
            incoming: vec![],
            outgoing: vec![],
            xi: vec![],
            kappa: vec![],
            phi_flux: 0.0,
        }
    }

    fn t_network() -> (NetworkSpec, Vec<ArcGrid>) {
        let lam = 0.33f64.sqrt();
        let net = NetworkSpec::new(
            vec![
                arc(1, 0, 1, 1.0, lam),
                arc(2, 1, 2, 1.0, lam),
                arc(3, 1, 3, 1.0, lam),
            ],
            vec![
                node(0, NodeKind::OuterNoflux),
                node(1, NodeKind::Internal),
                node(2, NodeKind::OuterNoflux),
                node(3, NodeKind::OuterNoflux),
            ],
        )
        .unwrap();
        let k = 0.05 / (2.0 * lam);
        let grids = crate::network::build_grids(&net, k).unwrap();
        (net, grids)
    }

    fn random_init(sim: &Simulator, seed: u64, lo: f64, hi: f64) -> NetState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arcs = sim
            .grids
            .iter()
            .map(|g| {
                let mut s = ArcState::zeros(g.n_points());
                for j in 0..g.n_points() {
                    let u = rng.gen_range(lo..hi);
                    s.u_plus[j] = 0.5 * u;
                    s.u_minus[j] = 0.5 * u;
                }
                s.phi_x = recover_phi_x(&s.phi, g.h);
                s.f = compute_f(&s.u_plus, &s.u_minus, &s.phi_x, 1.0);
                s
            })
            .collect();
        NetState {
            arcs,
            t: 0.0,
            step: 0,
        }
    }

    #[test]
    fn noflux_network_conserves_mass_with_chemotaxis() {
        let (net, grids) = t_network();
        let sim = Simulator::new(net, grids, SimOptions::default()).unwrap();
        let mut state = random_init(&sim, 4, 0.25, 0.35);
        // nonuniform chemoattractant so the f terms are genuinely exercised
        state.arcs[1].phi.fill(2.0);
        state.arcs[1].phi_x = recover_phi_x(&state.arcs[1].phi, sim.grids[1].h);
        let (_, mu0) = trapezoidal_mass(&state.arcs, &sim.grids);
        let mut mu_prev = mu0;
        for _ in 0..50 {
            let (next, diag) = sim.step(&state).unwrap();
            assert!(
                (diag.total_mass - mu_prev).abs() <= 1e-12 * mu0.max(1.0),
                "step {} drift {}",
                diag.step,
                diag.total_mass - mu_prev
            );
            for (node, r) in &diag.node_flux_residuals {
                assert!(r.abs() <= 1e-12, "node {node} flux residual {r}");
            }
            mu_prev = diag.total_mass;
            state = next;
        }
    }

    #[test]
    fn source_sink_line_obeys_mass_ledger() {
        let lam = 0.33f64.sqrt();
        let net = NetworkSpec::new(
            vec![arc(1, 0, 1, 1.0, lam), arc(2, 1, 2, 1.0, lam)],
            vec![
                node(0, NodeKind::OuterInflowSource),
                node(1, NodeKind::Internal),
                node(2, NodeKind::OuterInflowSink),
            ],
        )
        .unwrap();
        let k = 0.05 / (2.0 * lam);
        let grids = crate::network::build_grids(&net, k).unwrap();
        let sim = Simulator::new(net, grids, SimOptions::default()).unwrap();
        let mut state = random_init(&sim, 9, 0.45, 0.55);
        let (_, mut mu_prev) = trapezoidal_mass(&state.arcs, &sim.grids);
        for _ in 0..100 {
            let (next, diag) = sim.step(&state).unwrap();
            let ledger = diag.inflow_mass_increment;
            let dmu = diag.total_mass - mu_prev;
            assert!(
                (dmu - ledger).abs() <= 1e-12 * mu_prev.max(1.0),
                "step {}: dmu {dmu} vs ledger {ledger}",
                diag.step
            );
            mu_prev = diag.total_mass;
            state = next;
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let (net, grids) = t_network();
        let sim = Simulator::new(net, grids, SimOptions::default()).unwrap();
        let state = random_init(&sim, 0, 0.0, f64::MIN_POSITIVE);
        let (next, diag) = sim.step(&state).unwrap();
        assert!(diag.total_mass.abs() < 1e-300);
        for s in &next.arcs {
            assert!(s.u_plus.iter().all(|&v| v.abs() < 1e-300));
            assert!(s.phi.iter().all(|&v| v.abs() < 1e-300));
        }
    }

    #[test]
    fn blowup_cap_is_enforced() {
        let (net, grids) = t_network();
        let sim = Simulator::new(
            net,
            grids,
            SimOptions {
                blowup_cap: 0.1,
                ..SimOptions::default()
            },
        )
        .unwrap();
        let state = random_init(&sim, 4, 0.25, 0.35);
        match sim.step(&state) {
            Err(Error::BlowUp { .. }) => {}
            other => panic!("expected BlowUp, got {other:?}"),
        }
    }
}
