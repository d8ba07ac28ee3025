//! Banded LU with partial pivoting.
//!
//! The matrix is first symmetrically permuted (reverse Cuthill-McKee when it
//! narrows the band, identity otherwise). Elimination then follows the LAPACK
//! `gbtrf` layout: with `kl` sub- and `ku` super-diagonals, pivoting widens
//! the upper band to `kl + ku`, so each active row stores `2 kl + ku + 1`
//! entries.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::SparseMat;
use crate::par::{self, Exec};

pub const TOL_LIN: f64 = 1e-10;
const PIVOT_REL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    kl: usize,
    ku: usize,
    /// new index -> original index
    perm: Vec<usize>,
    /// U rows, `width` entries each; entry (i, j) at `i * width + (j - i)`, j ≥ i.
    upper: Vec<f64>,
    width: usize,
    /// Multipliers of step k at `k * kl + (i - k - 1)` for rows k+1..=k+kl.
    lower: Vec<f64>,
    pivots: Vec<usize>,
    matrix: SparseMat,
    norm: f64,
}

fn bandwidths(a: &SparseMat, inv: &[usize]) -> (usize, usize) {
    let mut kl = 0;
    let mut ku = 0;
    for (i, j, _) in a.triplets() {
        let (pi, pj) = (inv[i], inv[j]);
        if pi > pj {
            kl = kl.max(pi - pj);
        } else {
            ku = ku.max(pj - pi);
        }
    }
    (kl, ku)
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern (new -> old).
fn rcm_order(a: &SparseMat) -> Vec<usize> {
    let n = a.n_rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|v| !visited[*v])
            .min_by_key(|v| (degree[*v], *v))
            .unwrap();
        let start = peripheral(&adj, &degree, start);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|w| !visited[*w]).collect();
            next.sort_by_key(|w| (degree[*w], *w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Pseudo-peripheral node: repeatedly jump to a low-degree node of the last BFS level.
fn peripheral(adj: &[Vec<usize>], degree: &[usize], mut root: usize) -> usize {
    let mut depth = 0;
    for _ in 0..8 {
        let mut level = vec![usize::MAX; adj.len()];
        level[root] = 0;
        let mut queue = VecDeque::from([root]);
        let mut last = root;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adj[v] {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let ecc = level[last];
        if ecc <= depth {
            break;
        }
        depth = ecc;
        root = (0..adj.len())
            .filter(|v| level[*v] == ecc)
            .min_by_key(|v| (degree[*v], *v))
            .unwrap();
    }
    root
}

impl LuFactor {
    pub fn new(a: &SparseMat) -> Result<LuFactor> {
        if !a.is_square() {
            return Err(Error::DimMismatch {
                expected: a.n_rows(),
                got: a.n_cols(),
            });
        }
        let n = a.n_rows();
        let identity: Vec<usize> = (0..n).collect();
        let (kl0, ku0) = bandwidths(a, &identity);
        let rcm = rcm_order(a);
        let mut inv = vec![0; n];
        for (new, &old) in rcm.iter().enumerate() {
            inv[old] = new;
        }
        let (kl1, ku1) = bandwidths(a, &inv);
        let (perm, inv, kl, ku) = if 2 * kl1 + ku1 < 2 * kl0 + ku0 {
            (rcm, inv, kl1, ku1)
        } else {
            (identity.clone(), identity, kl0, ku0)
        };

        let norm = a.norm_inf();
        let width = kl + ku + 1;
        // Active row i holds columns i - kl ..= i + kl + ku at offset (j + kl - i).
        let wide = 2 * kl + ku + 1;
        let mut rows = vec![0.0; n * wide];
        for (i, j, v) in a.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            rows[pi * wide + (pj + kl - pi)] = v;
        }
        let mut upper = vec![0.0; n * width];
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        let threshold = PIVOT_REL * norm;

        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[k * wide + kl].abs();
            for i in k + 1..=last {
                let v = rows[i * wide + (k + kl - i)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) || best == 0.0 {
                return Err(Error::SingularMatrix {
                    step: k,
                    pivot: best,
                });
            }
            pivots[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    rows.swap(k * wide + (j + kl - k), p * wide + (j + kl - p));
                }
            }
            let pivot = rows[k * wide + kl];
            for i in k + 1..=last {
                let idx = i * wide + (k + kl - i);
                let l = rows[idx] / pivot;
                rows[idx] = 0.0;
                lower[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        rows[i * wide + (j + kl - i)] -= l * rows[k * wide + (j + kl - k)];
                    }
                }
            }
            for j in k..=jmax {
                upper[k * width + (j - k)] = rows[k * wide + (j + kl - k)];
            }
        }
        Ok(LuFactor {
            n,
            kl,
            ku,
            perm,
            upper,
            width,
            lower,
            pivots,
            matrix: a.clone(),
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth after reordering.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                let last = (k + self.kl).min(n - 1);
                for i in k + 1..=last {
                    y[i] -= self.lower[k * self.kl + (i - k - 1)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + self.kl + self.ku).min(n - 1);
            let row = &self.upper[k * self.width..];
            let mut acc = y[k];
            for j in k + 1..=jmax {
                acc -= row[j - k] * y[j];
            }
            y[k] = acc / row[0];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solves `A x = b`, refining until the backward-error bound holds.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let mut x = self.solve_raw(b);
        let b_norm = inf_norm(b);
        for _ in 0..3 {
            let ax = self.matrix.matvec(&x)?;
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            if inf_norm(&r) <= TOL_LIN * (self.norm * inf_norm(&x) + b_norm) {
                break;
            }
            let dx = self.solve_raw(&r);
            x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        }
        Ok(x)
    }
}

/// Max-norm of a vector.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn lu_solve(a: &SparseMat, b: &[f64]) -> Result<Vec<f64>> {
    LuFactor::new(a)?.solve(b)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn max_abs(&self) -> f64 {
        inf_norm(&self.data)
    }
}

/// Inverse by column solves against unit vectors.
pub fn dense_inverse(a: &SparseMat, max_dof: usize, exec: Exec) -> Result<DenseMat> {
    if !a.is_square() {
        return Err(Error::DimMismatch {
            expected: a.n_rows(),
            got: a.n_cols(),
        });
    }
    let n = a.n_rows();
    if n > max_dof {
        return Err(Error::TooLarge { n, limit: max_dof });
    }
    let lu = LuFactor::new(a)?;
    let columns = par::try_map_range(exec, n, |j| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        lu.solve(&e)
    })?;
    let mut data = vec![0.0; n * n];
    for (j, col) in columns.iter().enumerate() {
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
    Ok(DenseMat {
        n_rows: n,
        n_cols: n,
        data,
    })
}
