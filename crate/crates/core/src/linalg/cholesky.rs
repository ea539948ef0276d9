//! Sparse SPD factorization: reverse Cuthill-McKee ordering followed by a
//! row-oriented envelope (profile) Cholesky. For the 2D lattice graphs used
//! here the envelope after RCM stays within a few grid lines.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};

/// `P A Pᵀ = L Lᵀ` with `L` stored row by row from its first nonzero column.
#[derive(Clone, Debug)]
pub struct SpdFactorization {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `inv[old] = new`.
    inv: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
}

/// Pivots at or below this fraction of the original diagonal count as zero.
const PIVOT_TOL: f64 = 1e-14;

fn adjacency(a: &CsrMatrix<f64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for (r, c, v) in a.triplet_iter() {
        if r != c && *v != 0.0 {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

fn bfs_levels(adj: &[Vec<usize>], root: usize, level: &mut [usize]) -> (usize, Vec<usize>) {
    let mut seen = Vec::new();
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        seen.push(v);
        depth = depth.max(level[v]);
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (depth, seen)
}

/// Reverse Cuthill-McKee order (`perm[new] = old`), one component at a time,
/// each rooted at a pseudo-peripheral node.
pub fn rcm_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];
    for seed in 0..n {
        if placed[seed] {
            continue;
        }
        // pseudo-peripheral root
        let mut root = seed;
        let (mut depth, mut comp) = bfs_levels(adj, root, &mut level);
        for _ in 0..8 {
            let last = comp.iter().filter(|v| level[**v] == depth).min_by_key(|v| (deg[**v], **v)).copied().unwrap();
            for v in &comp {
                level[*v] = usize::MAX;
            }
            let (d2, c2) = bfs_levels(adj, last, &mut level);
            if d2 <= depth {
                for v in &c2 {
                    level[*v] = usize::MAX;
                }
                break;
            }
            root = last;
            depth = d2;
            comp = c2;
        }
        for v in &comp {
            level[*v] = usize::MAX;
        }
        let begin = order.len();
        placed[root] = true;
        order.push(root);
        let mut head = begin;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|w| !placed[*w]).collect();
            next.sort_by_key(|w| (deg[*w], *w));
            for w in next {
                placed[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

impl SpdFactorization {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn fill(&self) -> usize {
        self.l.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.l[self.start[i]..self.start[i + 1]]
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "right-hand side has wrong length");
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let row = self.row(i);
            let f = self.first[i];
            let mut s = y[i];
            for (k, l) in row[..row.len() - 1].iter().enumerate() {
                s -= l * y[f + k];
            }
            y[i] = s / row[row.len() - 1];
        }
        for i in (0..n).rev() {
            let row = self.row(i);
            let f = self.first[i];
            let xi = y[i] / row[row.len() - 1];
            y[i] = xi;
            for (k, l) in row[..row.len() - 1].iter().enumerate() {
                y[f + k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solves column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            let col: Vec<f64> = b.column(c).iter().copied().collect();
            x.set_column(c, &nalgebra::DVector::from_vec(self.solve(&col)));
        }
        x
    }

    /// The permutation, `perm[new] = old`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Position of original row `old` in the factor.
    pub fn position(&self, old: usize) -> usize {
        self.inv[old]
    }
}

/// Factors a symmetric positive definite sparse matrix.
pub fn factor_spd(a: &CsrMatrix<f64>) -> Result<SpdFactorization> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape { expected: n, got: a.ncols() });
    }
    let perm = rcm_order(&adjacency(a));
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    // envelope of the permuted lower triangle
    let mut first: Vec<usize> = (0..n).collect();
    let mut diag = vec![0.0; n];
    for (r, c, v) in a.triplet_iter() {
        let (i, j) = (inv[r], inv[c]);
        if i == j {
            diag[i] += v;
        } else if j < i && *v != 0.0 {
            first[i] = first[i].min(j);
        }
    }
    let mut start = Vec::with_capacity(n + 1);
    start.push(0);
    for i in 0..n {
        start.push(start[i] + i - first[i] + 1);
    }
    let mut l = vec![0.0; start[n]];
    for (r, c, v) in a.triplet_iter() {
        let (i, j) = (inv[r], inv[c]);
        if j <= i {
            l[start[i] + j - first[i]] += v;
        }
    }
    for i in 0..n {
        let fi = first[i];
        let (done, rest) = l.split_at_mut(start[i]);
        let row = &mut rest[..i - fi + 1];
        for j in fi..i {
            let fj = first[j];
            let rj = &done[start[j]..start[j] + j - fj + 1];
            let lo = fi.max(fj);
            let mut s = row[j - fi];
            for k in lo..j {
                s -= row[k - fi] * rj[k - fj];
            }
            row[j - fi] = s / rj[j - fj];
        }
        let mut d = row[i - fi];
        for k in fi..i {
            d -= row[k - fi] * row[k - fi];
        }
        if !(d > PIVOT_TOL * diag[i].abs()) || !d.is_finite() {
            return Err(Error::NotSpd { pivot: perm[i] });
        }
        row[i - fi] = d.sqrt();
    }
    Ok(SpdFactorization { perm, inv, first, start, l })
}

/// Dense lower Cholesky factor; the error names the failing pivot.
pub fn dense_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape { expected: n, got: a.ncols() });
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > PIVOT_TOL * a[(j, j)].abs()) || !d.is_finite() {
            return Err(Error::NotSpd { pivot: j });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::{from_dense, mul};

    #[test]
    fn identity() {
        let a = from_dense(&DMatrix::identity(3, 3));
        let f = factor_spd(&a).unwrap();
        assert_eq!(f.solve(&[1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let a = from_dense(&DMatrix::from_row_slice(2, 2, &[4.0, -1.0, -1.0, 4.0]));
        let x = factor_spd(&a).unwrap().solve(&[1.0, 0.0]);
        assert!((x[0] - 4.0 / 15.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(factor_spd(&a), Err(Error::NotSpd { .. })));
        let d = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(factor_spd(&from_dense(&d)), Err(Error::NotSpd { pivot: 1 })));
        assert!(matches!(dense_cholesky(&d), Err(Error::NotSpd { pivot: 1 })));
    }

    #[test]
    fn laplacian_residual() {
        // 1D Laplacian on 50 nodes, scrambled
        let n = 50;
        let mut d = DMatrix::zeros(n, n);
        let p: Vec<usize> = (0..n).map(|i| (i * 17) % n).collect();
        for i in 0..n {
            d[(p[i], p[i])] = 2.0;
            if i + 1 < n {
                d[(p[i], p[i + 1])] = -1.0;
                d[(p[i + 1], p[i])] = -1.0;
            }
        }
        let a = from_dense(&d);
        let f = factor_spd(&a).unwrap();
        assert!(f.fill() <= 2 * n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r: f64 = mul(&a, &x).iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert!(r < 1e-12);
    }
}
