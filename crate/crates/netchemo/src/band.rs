//! Banded direct solver: compact band storage, LU factorization with
//! partial pivoting, and a reverse Cuthill-McKee ordering to keep the
//! node-coupled rows inside a narrow band.

use crate::error::{Error, Result};

/// Square matrix stored band-compact: row i holds columns
/// `i-kl ..= i+ku` at `data[i*w + (j - i + kl)]`, w = kl + ku + 1.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    /// Builds from COO triplets, sizing the band to fit.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for &(i, j, _) in triplets {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "({i},{j}) outside band");
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let at = self.idx(i, j);
        self.data[at] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }
}

/// LU factors of a band matrix, partial pivoting; fill widens the upper
/// band to kl + ku.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Upper factor rows, width kl + ku + 1, row-leading-entry normalized.
    upper: Vec<f64>,
    /// Multipliers, width kl.
    lower: Vec<f64>,
    /// Pivot row chosen at each elimination step.
    piv: Vec<usize>,
}

impl BandLu {
    /// Factorizes. The input layout is repacked so that each row starts at
    /// its leftmost in-band column, then Gaussian elimination with row
    /// pivoting runs down the band.
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.ku;
        let mm = kl + ku + 1;
        let mut u = a.data.clone();
        // shift the top kl rows left so every row begins at its first
        // in-band column
        let mut l = kl;
        for i in 0..kl.min(n) {
            for j in (kl - i)..mm {
                u[i * mm + j - l] = u[i * mm + j];
            }
            l -= 1;
            for j in (mm - l - 1)..mm {
                u[i * mm + j] = 0.0;
            }
        }
        let mut lower = vec![0.0; n * kl];
        let mut piv = vec![0usize; n];
        let mut l = kl;
        for k in 0..n {
            if l < n {
                l += 1;
            }
            let mut p = k;
            let mut dum = u[k * mm];
            for j in k + 1..l.min(k + kl + 1) {
                if u[j * mm].abs() > dum.abs() {
                    dum = u[j * mm];
                    p = j;
                }
            }
            piv[k] = p;
            if dum == 0.0 {
                return Err(Error::SingularSystem { row: k });
            }
            if p != k {
                for j in 0..mm {
                    u.swap(k * mm + j, p * mm + j);
                }
            }
            for i in k + 1..l.min(k + kl + 1) {
                let mult = u[i * mm] / u[k * mm];
                lower[k * kl + (i - k - 1)] = mult;
                for j in 1..mm {
                    u[i * mm + j - 1] = u[i * mm + j] - mult * u[k * mm + j];
                }
                u[i * mm + mm - 1] = 0.0;
            }
        }
        Ok(BandLu {
            n,
            kl,
            upper: u,
            lower,
            piv,
        })
    }

    /// Solves A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let kl = self.kl;
        let mm = self.upper.len() / n.max(1);
        let mut l = kl;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            if l < n {
                l += 1;
            }
            for i in k + 1..l.min(k + kl + 1) {
                b[i] -= self.lower[k * kl + (i - k - 1)] * b[k];
            }
        }
        let mut l = 1;
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in 1..l {
                sum -= self.upper[i * mm + k] * b[i + k];
            }
            b[i] = sum / self.upper[i * mm];
            if l < mm {
                l += 1;
            }
        }
    }
}

/// Reverse Cuthill-McKee ordering of an undirected sparsity graph given as
/// adjacency lists. Returns `order` with `order[new] = old`.
pub fn rcm_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let degree = |v: usize| adj[v].len();
    // handle each connected component, starting from a minimum-degree vertex
    loop {
        let start = match (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree(v), v))
        {
            Some(v) => v,
            None => break,
        };
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree(w), w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with partial pivoting; the independent
    /// oracle for the banded path.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            x.swap(k, p);
            let d = m[k][k];
            assert!(d != 0.0);
            for i in k + 1..n {
                let mult = m[i][k] / d;
                for j in k..n {
                    m[i][j] -= mult * m[k][j];
                }
                x[i] -= mult * x[k];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = m[i][j] * x[j];
                x[i] -= t;
            }
            x[i] /= m[i][i];
        }
        x
    }

    #[test]
    fn identity_solve() {
        let n = 7;
        let mut a = BandMatrix::zeros(n, 0, 0);
        for i in 0..n {
            a.add(i, i, 1.0);
        }
        let lu = BandLu::factor(&a).unwrap();
        let mut b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let expect = b.clone();
        lu.solve(&mut b);
        assert_eq!(b, expect);
    }

    #[test]
    fn random_banded_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..20 {
            let n = rng.gen_range(5..200);
            let kl = rng.gen_range(0..4usize.min(n - 1));
            let ku = rng.gen_range(0..4usize.min(n - 1));
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let v: f64 = if i == j {
                        rng.gen_range(2.0..4.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
                    } else {
                        rng.gen_range(-1.0..1.0)
                    };
                    band.add(i, j, v);
                    dense[i][j] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lu = BandLu::factor(&band).unwrap();
            let mut x = b.clone();
            lu.solve(&mut x);
            let y = dense_solve(&dense, &b);
            for i in 0..n {
                assert!(
                    (x[i] - y[i]).abs() <= 1e-10 * y[i].abs().max(1.0),
                    "trial {trial} row {i}: {} vs {}",
                    x[i],
                    y[i]
                );
            }
        }
    }

    #[test]
    fn pivoting_handles_weak_diagonal() {
        // boundary-style rows with |diag| < off-diag sum need pivoting
        let n = 4;
        let mut a = BandMatrix::zeros(n, 1, 2);
        let rows = [
            [1.0, -4.0 / 3.0, 1.0 / 3.0, 0.0],
            [-1.0, 3.0, -1.0, 0.0],
            [0.0, -1.0, 3.0, -1.0],
            [0.0, 0.0, -4.0 / 3.0, 1.0],
        ];
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if rows[i][j] != 0.0 {
                    a.add(i, j, rows[i][j]);
                    dense[i][j] = rows[i][j];
                }
            }
        }
        let b = vec![0.5, 1.0, -1.0, 2.0];
        let lu = BandLu::factor(&a).unwrap();
        let mut x = b.clone();
        lu.solve(&mut x);
        let y = dense_solve(&dense, &b);
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 0.0);
        a.add(2, 2, 1.0);
        match BandLu::factor(&a) {
            Err(Error::SingularSystem { .. }) => {}
            other => panic!("expected SingularSystem, got {other:?}"),
        }
    }

    #[test]
    fn rcm_shrinks_two_chain_coupling() {
        // two chains of 10 coupled at their far ends: natural order has
        // bandwidth ~10, RCM must bring it down
        let n = 20;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let connect = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| {
            adj[a].push(b);
            adj[b].push(a);
        };
        for i in 0..9 {
            connect(i, i + 1, &mut adj);
            connect(10 + i, 10 + i + 1, &mut adj);
        }
        connect(0, 10, &mut adj);
        connect(9, 19, &mut adj);
        let order = rcm_order(&adj);
        let mut pos = vec![0usize; n];
        for (newi, &old) in order.iter().enumerate() {
            pos[old] = newi;
        }
        let mut bw = 0usize;
        for (v, ns) in adj.iter().enumerate() {
            for &w in ns {
                bw = bw.max(pos[v].abs_diff(pos[w]));
            }
        }
        assert!(bw <= 4, "bandwidth {bw}");
    }
}
