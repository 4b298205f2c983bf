//! Crank-Nicolson advance of the chemoattractant on the whole network as
//! one banded linear system: interior CN rows, second-order Neumann rows at
//! outer nodes, Kedem-Katchalsky transmission rows at internal nodes.
//!
//! The matrix depends only on the grids and parameters, so it is assembled
//! and factored once per run; each step only rebuilds the right-hand side.

use crate::band::{rcm_order, BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::ArcGrid;
use crate::network::NetworkSpec;
use crate::state::ArcState;

/// The assembled global system for one step.
#[derive(Debug, Clone)]
pub struct GlobalPhiSystem {
    pub structure: PhiStructure,
    pub rhs: Vec<f64>,
}

/// Time-independent part: index maps, the matrix in triplet and banded
/// (RCM-permuted) form.
#[derive(Debug, Clone)]
pub struct PhiStructure {
    /// First global row of each arc, plus total count at the end.
    pub offsets: Vec<usize>,
    pub n: usize,
    /// Row/col/value triplets in the natural (arc-by-arc) numbering.
    pub triplets: Vec<(usize, usize, f64)>,
    /// `perm[new] = old` from reverse Cuthill-McKee.
    pub perm: Vec<usize>,
    /// `pos[old] = new`.
    pub pos: Vec<usize>,
    pub band: BandMatrix,
    /// Per-row φ̄ boundary data folded into the RHS (0 for most rows).
    pub rhs_const: Vec<f64>,
    /// (arc, grid) quick-access copies.
    grids: Vec<ArcGrid>,
    /// Per arc: production a, degradation b, diffusivity D.
    coeffs: Vec<(f64, f64, f64)>,
}

impl PhiStructure {
    /// Builds the matrix: one row per grid point of every arc.
    pub fn new(net: &NetworkSpec, grids: &[ArcGrid]) -> Result<Self> {
        let n_arcs = net.arcs.len();
        if grids.len() != n_arcs {
            return Err(Error::Assembly(format!(
                "{} grids for {} arcs",
                grids.len(),
                n_arcs
            )));
        }
        let mut offsets = Vec::with_capacity(n_arcs + 1);
        let mut n = 0usize;
        for g in grids {
            offsets.push(n);
            n += g.n_points();
        }
        offsets.push(n);

        let row_of = |arc: usize, j: usize| offsets[arc] + j;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut rhs_const = vec![0.0; n];

        // interior CN rows
        for (ai, (arc, g)) in net.arcs.iter().zip(grids).enumerate() {
            let r = arc.diffusivity * g.k / (2.0 * g.h * g.h);
            let diag = 1.0 + 2.0 * r + 0.5 * arc.degradation * g.k;
            for j in 1..=g.m {
                let row = row_of(ai, j);
                triplets.push((row, row, diag));
                triplets.push((row, row_of(ai, j - 1), -r));
                triplets.push((row, row_of(ai, j + 1), -r));
            }
        }

        // boundary / transmission rows at every node
        for node in &net.nodes {
            let attached = node.attached();
            // (arc index, incoming) in ξ/κ order
            let members: Vec<(usize, bool)> = attached
                .iter()
                .map(|&id| {
                    let ai = net.arc_index(id).ok_or_else(|| {
                        Error::Assembly(format!("node {} references missing arc {id}", node.id))
                    })?;
                    Ok((ai, net.arcs[ai].to_node == node.id))
                })
                .collect::<Result<_>>()?;

            if node.kind.is_outer() {
                let (ai, incoming) = members[0];
                let g = &grids[ai];
                // incoming at an outer node means the arc's x = L end sits
                // there (O_out in the u-convention); x = 0 otherwise
                let (row, s1, s2, sgn) = if incoming {
                    (row_of(ai, g.m + 1), row_of(ai, g.m), row_of(ai, g.m - 1), 1.0)
                } else {
                    (row_of(ai, 0), row_of(ai, 1), row_of(ai, 2), -1.0)
                };
                triplets.push((row, row, 1.0));
                triplets.push((row, s1, -4.0 / 3.0));
                triplets.push((row, s2, 1.0 / 3.0));
                rhs_const[row] = sgn * 2.0 * g.h / 3.0 * node.phi_flux;
            } else {
                for (r_idx, &(ai, incoming)) in members.iter().enumerate() {
                    let g = &grids[ai];
                    let d_i = net.arcs[ai].diffusivity;
                    let w = 2.0 * g.h / (3.0 * d_i);
                    let kappa_sum: f64 = node.kappa[r_idx].iter().sum();
                    let eta = 1.0 + w * kappa_sum;
                    let (row, s1, s2) = if incoming {
                        (row_of(ai, g.m + 1), row_of(ai, g.m), row_of(ai, g.m - 1))
                    } else {
                        (row_of(ai, 0), row_of(ai, 1), row_of(ai, 2))
                    };
                    triplets.push((row, row, eta));
                    triplets.push((row, s1, -4.0 / 3.0));
                    triplets.push((row, s2, 1.0 / 3.0));
                    for (c_idx, &(aj, j_incoming)) in members.iter().enumerate() {
                        let kappa = node.kappa[r_idx][c_idx];
                        if kappa == 0.0 {
                            continue;
                        }
                        let gj = &grids[aj];
                        let col = if j_incoming {
                            row_of(aj, gj.m + 1)
                        } else {
                            row_of(aj, 0)
                        };
                        triplets.push((row, col, -w * kappa));
                    }
                }
            }
        }

        // RCM ordering over the sparsity graph
        let mut adj = vec![Vec::new(); n];
        for &(i, j, _) in &triplets {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        let perm = rcm_order(&adj);
        let mut pos = vec![0usize; n];
        for (newi, &old) in perm.iter().enumerate() {
            pos[old] = newi;
        }
        let permuted: Vec<(usize, usize, f64)> = triplets
            .iter()
            .map(|&(i, j, v)| (pos[i], pos[j], v))
            .collect();
        let band = BandMatrix::from_triplets(n, &permuted);

        Ok(PhiStructure {
            offsets,
            n,
            triplets,
            perm,
            pos,
            band,
            rhs_const,
            grids: grids.to_vec(),
            coeffs: net
                .arcs
                .iter()
                .map(|a| (a.production, a.degradation, a.diffusivity))
                .collect(),
        })
    }

    /// Right-hand side from the time-n state and the freshly computed
    /// hyperbolic densities at n+1 (the CN source uses their average).
    pub fn rhs(&self, prev: &[ArcState], next: &[ArcState]) -> Vec<f64> {
        let mut rhs = self.rhs_const.clone();
        for (ai, g) in self.grids.iter().enumerate() {
            let (a, b, d) = self.coeffs[ai];
            let r = d * g.k / (2.0 * g.h * g.h);
            let p = &prev[ai];
            let q = &next[ai];
            let base = self.offsets[ai];
            for j in 1..=g.m {
                rhs[base + j] = p.phi[j]
                    + r * (p.phi[j + 1] - 2.0 * p.phi[j] + p.phi[j - 1])
                    + 0.5 * a * g.k * (q.u(j) + p.u(j))
                    - 0.5 * b * g.k * p.phi[j];
            }
        }
        rhs
    }

    /// ‖A x − b‖∞ in the natural numbering.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let mut r = rhs.to_vec();
        for &(i, j, v) in &self.triplets {
            r[i] -= v * x[j];
        }
        r.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Splits a flat solution vector back into per-arc arrays.
    pub fn split(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.offsets
            .windows(2)
            .map(|w| x[w[0]..w[1]].to_vec())
            .collect()
    }
}

/// Factored solver reused across the run.
#[derive(Debug)]
pub struct PhiSolver {
    pub structure: PhiStructure,
    lu: BandLu,
}

impl PhiSolver {
    pub fn new(net: &NetworkSpec, grids: &[ArcGrid]) -> Result<Self> {
        let structure = PhiStructure::new(net, grids)?;
        let lu = BandLu::factor(&structure.band)?;
        Ok(PhiSolver { structure, lu })
    }

    /// Advances φ one step; returns the per-arc φ^{n+1} arrays and the
    /// solve residual ‖Aφ − b‖∞.
    pub fn step(&self, prev: &[ArcState], next: &[ArcState]) -> Result<(Vec<Vec<f64>>, f64)> {
        let rhs = self.structure.rhs(prev, next);
        let mut pb: Vec<f64> = self.structure.perm.iter().map(|&old| rhs[old]).collect();
        self.lu.solve(&mut pb);
        let mut x = vec![0.0; self.structure.n];
        for (newi, &old) in self.structure.perm.iter().enumerate() {
            x[old] = pb[newi];
        }
        let res = self.structure.residual(&x, &rhs);
        let scale = rhs.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
        if !res.is_finite() || res > 1e-6 * scale {
            return Err(Error::Assembly(format!(
                "parabolic solve residual {res:.3e} exceeds 1e-6 x ||b||"
            )));
        }
        Ok((self.structure.split(&x), res))
    }
}

/// Assembles the global system (matrix + RHS) for one step.
pub fn assemble(
    net: &NetworkSpec,
    grids: &[ArcGrid],
    prev: &[ArcState],
    next: &[ArcState],
) -> Result<GlobalPhiSystem> {
    let structure = PhiStructure::new(net, grids)?;
    let rhs = structure.rhs(prev, next);
    Ok(GlobalPhiSystem { structure, rhs })
}

/// Direct banded solve of an assembled system; returns per-arc φ arrays.
/// Post: ‖Ax − b‖∞ ≤ 1e−10 ‖b‖∞ on well-conditioned inputs.
pub fn solve(system: &GlobalPhiSystem) -> Result<Vec<Vec<f64>>> {
    let s = &system.structure;
    let lu = BandLu::factor(&s.band)?;
    let mut pb: Vec<f64> = s.perm.iter().map(|&old| system.rhs[old]).collect();
    lu.solve(&mut pb);
    let mut x = vec![0.0; s.n];
    for (newi, &old) in s.perm.iter().enumerate() {
        x[old] = pb[newi];
    }
    Ok(s.split(&x))
}

/// Second-order recovery of φₓ: central differences inside, 3-point
/// one-sided stencils at the ends (exact on quadratics).
pub fn recover_phi_x(phi: &[f64], h: f64) -> Vec<f64> {
    let n = phi.len();
    assert!(n >= 3, "need at least 3 points");
    let mut out = vec![0.0; n];
    out[0] = (-phi[2] + 4.0 * phi[1] - 3.0 * phi[0]) / (2.0 * h);
    for j in 1..n - 1 {
        out[j] = (phi[j + 1] - phi[j - 1]) / (2.0 * h);
    }
    out[n - 1] = (phi[n - 3] - 4.0 * phi[n - 2] + 3.0 * phi[n - 1]) / (2.0 * h);
    out
}

/// Chemotactic source f = χ φₓ u, elementwise.
pub fn compute_f(u_plus: &[f64], u_minus: &[f64], phi_x: &[f64], chi: f64) -> Vec<f64> {
    u_plus
        .iter()
        .zip(u_minus)
        .zip(phi_x)
        .map(|((&p, &m), &px)| chi * px * (p + m))
        .collect()
}
