//! CSV snapshots: one row per grid point, floats written with 17
//! significant digits so a re-parse is bit-exact.

use crate::error::{Error, Result};
use crate::grid::ArcGrid;
use crate::network::NetworkSpec;
use crate::state::NetState;
use std::io::Write;
use std::path::Path;

pub const HEADER: &str = "arc_id,j,x,u,v,phi,phi_x";

/// One parsed snapshot row.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub arc_id: u32,
    pub j: usize,
    pub x: f64,
    pub u: f64,
    pub v: f64,
    pub phi: f64,
    pub phi_x: f64,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the state as CSV. Values are the physical variables
/// u = u⁺ + u⁻ and v = λ(u⁺ − u⁻).
pub fn write_snapshot(
    path: &Path,
    net: &NetworkSpec,
    grids: &[ArcGrid],
    state: &NetState,
) -> Result<()> {
    let mut out = String::with_capacity(64 * (2 + grids.iter().map(|g| g.n_points()).sum::<usize>()));
    out.push_str(HEADER);
    out.push('\n');
    for (i, (arc, g)) in net.arcs.iter().zip(grids).enumerate() {
        let s = &state.arcs[i];
        for j in 0..g.n_points() {
            let u = s.u_plus[j] + s.u_minus[j];
            let v = arc.lambda * (s.u_plus[j] - s.u_minus[j]);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                arc.id,
                j,
                fmt(g.x(j)),
                fmt(u),
                fmt(v),
                fmt(s.phi[j]),
                fmt(s.phi_x[j]),
            ));
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Parses a snapshot written by `write_snapshot` (or anything matching its
/// header). Tolerates no deviation in column count or order.
pub fn parse_snapshot(text: &str) -> Result<Vec<SnapshotRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == HEADER => {}
        Some(h) => {
            return Err(Error::Snapshot(format!("unexpected header `{h}`")));
        }
        None => return Err(Error::Snapshot("empty file".into())),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Snapshot(format!(
                "line {}: expected 7 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Snapshot(format!("line {}: bad {what}", lineno + 2));
        rows.push(SnapshotRow {
            arc_id: fields[0].parse().map_err(|_| bad("arc_id"))?,
            j: fields[1].parse().map_err(|_| bad("j"))?,
            x: fields[2].parse().map_err(|_| bad("x"))?,
            u: fields[3].parse().map_err(|_| bad("u"))?,
            v: fields[4].parse().map_err(|_| bad("v"))?,
            phi: fields[5].parse().map_err(|_| bad("phi"))?,
            phi_x: fields[6].parse().map_err(|_| bad("phi_x"))?,
        });
    }
    Ok(rows)
}

pub fn read_snapshot(path: &Path) -> Result<Vec<SnapshotRow>> {
    parse_snapshot(&std::fs::read_to_string(path)?)
}

/// Per-arc mean density from snapshot rows: trapezoidal sum of the u column
/// divided by the arc length. Returns (arc id, mean) sorted by arc id.
pub fn arc_means(rows: &[SnapshotRow]) -> Vec<(u32, f64)> {
    use std::collections::BTreeMap;
    let mut by_arc: BTreeMap<u32, Vec<&SnapshotRow>> = BTreeMap::new();
    for r in rows {
        by_arc.entry(r.arc_id).or_default().push(r);
    }
    by_arc
        .into_iter()
        .map(|(id, mut rows)| {
            rows.sort_by_key(|r| r.j);
            let n = rows.len();
            let mut sum = 0.0;
            for (i, r) in rows.iter().enumerate() {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                sum += w * r.u;
            }
            // spacing from the coordinates; (n-1) intervals span the arc
            let h = if n >= 2 { rows[n - 1].x / (n as f64 - 1.0) } else { 1.0 };
            let len = rows[n - 1].x.max(f64::MIN_POSITIVE);
            (id, h * sum / len)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ArcSpec, NodeKind, NodeSpec};
    use crate::state::ArcState;
    use rand::{Rng, SeedableRng};

    fn tiny_net() -> (NetworkSpec, Vec<ArcGrid>) {
        let net = NetworkSpec::new(
            vec![ArcSpec {
                id: 1,
                from_node: 0,
                to_node: 1,
                length: 0.4,
                lambda: 1.0,
                diffusivity: 1.0,
                production: 1.0,
                degradation: 0.1,
                chi: 1.0,
            }],
            vec![
                NodeSpec {
                    id: 0,
                    kind: NodeKind::OuterNoflux,
                    incoming: vec![],
                    outgoing: vec![],
                    xi: vec![],
                    kappa: vec![],
                    phi_flux: 0.0,
                },
                NodeSpec {
                    id: 1,
                    kind: NodeKind::OuterNoflux,
                    incoming: vec![],
                    outgoing: vec![],
                    xi: vec![],
                    kappa: vec![],
                    phi_flux: 0.0,
                },
            ],
        )
        .unwrap();
        let grids = vec![ArcGrid { h: 0.1, k: 0.05, m: 3 }];
        (net, grids)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (net, grids) = tiny_net();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut s = ArcState::zeros(5);
        for j in 0..5 {
            s.u_plus[j] = rng.gen_range(0.0..1.0);
            s.u_minus[j] = rng.gen_range(0.0..1.0);
            s.phi[j] = rng.gen_range(0.0..2.0);
            s.phi_x[j] = rng.gen_range(-1.0..1.0);
        }
        let state = NetState {
            arcs: vec![s.clone()],
            t: 0.0,
            step: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        write_snapshot(&path, &net, &grids, &state).unwrap();
        let rows = read_snapshot(&path).unwrap();
        assert_eq!(rows.len(), 5);
        for (j, r) in rows.iter().enumerate() {
            let u = s.u_plus[j] + s.u_minus[j];
            let v = 1.0 * (s.u_plus[j] - s.u_minus[j]);
            // bit-exact: 17 significant digits round-trip f64 exactly
            assert_eq!(r.u.to_bits(), u.to_bits());
            assert_eq!(r.v.to_bits(), v.to_bits());
            assert_eq!(r.phi.to_bits(), s.phi[j].to_bits());
            assert_eq!(r.phi_x.to_bits(), s.phi_x[j].to_bits());
        }
    }

    #[test]
    fn bad_input_is_rejected() {
        assert!(parse_snapshot("").is_err());
        assert!(parse_snapshot("wrong,header\n").is_err());
        assert!(parse_snapshot(&format!("{HEADER}\n1,2,3\n")).is_err());
        assert!(parse_snapshot(&format!("{HEADER}\n1,0,0,0,0,0,zzz\n")).is_err());
        assert!(parse_snapshot(&format!("{HEADER}\n1,0,0e0,1e0,0e0,0e0,0e0\n")).is_ok());
    }

    #[test]
    fn arc_means_trapezoid() {
        // u ≡ 1 over 5 points on [0, 0.4] → mean exactly 1
        let rows: Vec<SnapshotRow> = (0..5)
            .map(|j| SnapshotRow {
                arc_id: 1,
                j,
                x: 0.1 * j as f64,
                u: 1.0,
                v: 0.0,
                phi: 0.0,
                phi_x: 0.0,
            })
            .collect();
        let means = arc_means(&rows);
        assert_eq!(means.len(), 1);
        assert!((means[0].1 - 1.0).abs() < 1e-14);
    }
}
