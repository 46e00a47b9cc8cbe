//! Left-looking sparse LU (Gilbert–Peierls) with threshold partial
//! pivoting, after a reverse Cuthill–McKee column ordering.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;
use crate::error::{Error, Result};

/// A diagonal pivot is kept if it is at least this fraction of the largest
/// candidate in its column.
const PIVOT_THRESHOLD: f64 = 0.1;

/// Factors `P_r · A · Q = L · U`.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    q: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<SparseLu> {
        let q = reverse_cuthill_mckee(a);
        SparseLu::factor_with_order(a, q)
    }

    pub fn factor_with_order(a: &CsrMatrix, q: Vec<usize>) -> Result<SparseLu> {
        let n = a.nrows();
        if a.ncols() != n || q.len() != n {
            return Err(Error::Shape(alloc::format!(
                "LU of a {}x{} matrix with an ordering of length {}",
                a.nrows(),
                a.ncols(),
                q.len()
            )));
        }
        // rows of the transpose are the columns of `a`
        let cols = a.transpose();
        const NONE: usize = usize::MAX;
        let mut pinv = vec![NONE; n];
        let mut lp = Vec::with_capacity(n + 1);
        let mut up = Vec::with_capacity(n + 1);
        let cap = 4 * a.nnz() + n;
        let mut li: Vec<usize> = Vec::with_capacity(cap);
        let mut lx: Vec<f64> = Vec::with_capacity(cap);
        let mut ui: Vec<usize> = Vec::with_capacity(cap);
        let mut ux: Vec<f64> = Vec::with_capacity(cap);
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut mark = vec![false; n];

        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());
            let col = q[k];

            // nonzero pattern of the solution of L x = A[:, col], topologically ordered
            let mut top = n;
            for (i, _) in cols.row(col) {
                if mark[i] {
                    continue;
                }
                // depth-first search from i through already pivoted columns of L
                let mut head = 0usize;
                stack[0] = i;
                loop {
                    let j = stack[head];
                    let jl = pinv[j];
                    if !mark[j] {
                        mark[j] = true;
                        pstack[head] = if jl == NONE { 0 } else { lp[jl] + 1 };
                    }
                    let mut done = true;
                    if jl != NONE {
                        let end = if jl + 1 < lp.len() { lp[jl + 1] } else { li.len() };
                        let mut p = pstack[head];
                        while p < end {
                            let r = li[p];
                            p += 1;
                            if !mark[r] {
                                pstack[head] = p;
                                head += 1;
                                stack[head] = r;
                                done = false;
                                break;
                            }
                        }
                    }
                    if done {
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }
            for &j in &xi[top..] {
                mark[j] = false;
                x[j] = 0.0;
            }
            for (i, v) in cols.row(col) {
                x[i] = v;
            }
            for &j in &xi[top..] {
                let jl = pinv[j];
                if jl == NONE {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for p in lp[jl] + 1..lp[jl + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }

            let mut ipiv = NONE;
            let mut amax = -1.0f64;
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == NONE || !(amax > 0.0) || !amax.is_finite() {
                return Err(Error::SingularMatrix { column: col });
            }
            if pinv[col] == NONE && x[col].abs() >= amax * PIVOT_THRESHOLD {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for r in li.iter_mut() {
            *r = pinv[*r];
        }
        Ok(SparseLu {
            n,
            q,
            pinv,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entries stored in both factors.
    pub fn fill(&self) -> usize {
        self.lx.len() + self.ux.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p]] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let d = self.up[j + 1] - 1;
            y[j] /= self.ux[d];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.up[j]..d {
                    y[self.ui[p]] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.q[k]] = y[k];
        }
        x
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `a`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let at = a.transpose();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        for (c, _) in a.row(r).chain(at.row(r)) {
            if c != r && c < n {
                adj[r].push(c);
            }
        }
        adj[r].sort_unstable();
        adj[r].dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    let bfs_last = |start: usize, level: &mut [usize]| -> (usize, usize) {
        let mut seen = Vec::new();
        let mut queue = VecDeque::new();
        level[start] = 0;
        queue.push_back(start);
        let mut far = (start, 0usize);
        while let Some(u) = queue.pop_front() {
            seen.push(u);
            let l = level[u];
            if l > far.1 || (l == far.1 && degree[u] < degree[far.0]) {
                far = (u, l);
            }
            for &w in &adj[u] {
                if level[w] == usize::MAX {
                    level[w] = l + 1;
                    queue.push_back(w);
                }
            }
        }
        for u in seen {
            level[u] = usize::MAX;
        }
        far
    };

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if placed[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let mut ecc = 0;
        for _ in 0..4 {
            let (far, depth) = bfs_last(start, &mut level);
            if depth <= ecc {
                break;
            }
            ecc = depth;
            start = far;
        }
        let first = order.len();
        placed[start] = true;
        order.push(start);
        let mut head = first;
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&w| !placed[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                placed[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;
    use rand::{Rng, SeedableRng};

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x);
        ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn solves_small_nonsymmetric() {
        let a = CsrMatrix::from_dense(2, 2, &[-3.0, -6.0, 2.0, -2.0]);
        let lu = SparseLu::factor(&a).unwrap();
        let x = lu.solve(&[0.0, 6.0]);
        assert!(residual(&a, &x, &[0.0, 6.0]) < 1e-14);
    }

    #[test]
    fn needs_pivoting() {
        let a = CsrMatrix::from_dense(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 1.0]);
        let lu = SparseLu::factor_with_order(&a, vec![0, 1, 2]).unwrap();
        let b = [1.0, 2.0, 3.0];
        assert!(residual(&a, &lu.solve(&b), &b) < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(SparseLu::factor(&a), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn random_banded_systems() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for n in [1, 5, 40, 200] {
            let mut t = TripletBuilder::new(n, n);
            for i in 0..n {
                t.push(i, i, 4.0 + rng.gen::<f64>());
                for _ in 0..3 {
                    let j = rng.gen_range(0..n);
                    t.push(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            let a = t.build();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lu = SparseLu::factor(&a).unwrap();
            assert!(residual(&a, &lu.solve(&b), &b) < 1e-11, "n = {n}");
        }
    }

    #[test]
    fn rcm_is_a_permutation_and_narrows_a_path() {
        // a path graph numbered in shuffled order
        let n = 30;
        let perm: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(perm[i], perm[i], 2.0);
            if i + 1 < n {
                t.push(perm[i], perm[i + 1], -1.0);
                t.push(perm[i + 1], perm[i], -1.0);
            }
        }
        let a = t.build();
        let q = reverse_cuthill_mckee(&a);
        let mut sorted = q.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let mut pos = vec![0; n];
        for (k, &i) in q.iter().enumerate() {
            pos[i] = k;
        }
        for r in 0..n {
            for (c, _) in a.row(r) {
                assert!(pos[r].abs_diff(pos[c]) <= 1);
            }
        }
    }
}
