//! Uniform grids on axis-aligned rectangles and interior subdomain masks.
//!
//! Nodes are enumerated lexicographically with x fastest. Interior nodes
//! (no index equal to 0 or n on any axis) get a second, dense numbering
//! used for unknowns.

use std::collections::VecDeque;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    n: [usize; 2],
    h: [f64; 2],
}

impl Grid {
    pub fn new(dim: usize, lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::BadGridSpec(format!("dimension {dim} not in {{1, 2}}")));
        }
        if lo.len() != dim || hi.len() != dim || n.len() != dim {
            return Err(Error::BadGridSpec(format!(
                "expected {dim} bounds and cell counts"
            )));
        }
        let mut g = Grid {
            dim,
            lo: [0.0; 2],
            hi: [0.0; 2],
            n: [1; 2],
            h: [0.0; 2],
        };
        for a in 0..dim {
            if !(lo[a].is_finite() && hi[a].is_finite()) || hi[a] <= lo[a] {
                return Err(Error::BadGridSpec(format!(
                    "axis {a}: need lo < hi, got [{}, {}]",
                    lo[a], hi[a]
                )));
            }
            if n[a] < 3 {
                return Err(Error::BadGridSpec(format!(
                    "axis {a}: need at least 3 cells, got {}",
                    n[a]
                )));
            }
            g.lo[a] = lo[a];
            g.hi[a] = hi[a];
            g.n[a] = n[a];
            g.h[a] = (hi[a] - lo[a]) / n[a] as f64;
        }
        if dim == 1 {
            g.n[1] = 0;
        }
        Ok(g)
    }

    pub fn new_1d(lo: f64, hi: f64, n: usize) -> Result<Grid> {
        Grid::new(1, &[lo], &[hi], &[n])
    }

    pub fn new_2d(lo: [f64; 2], hi: [f64; 2], n: [usize; 2]) -> Result<Grid> {
        Grid::new(2, &lo, &hi, &n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo[..self.dim]
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    /// Stable identifier derived from the grid parameters.
    pub fn id(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.dim.hash(&mut hasher);
        for a in 0..self.dim {
            self.lo[a].to_bits().hash(&mut hasher);
            self.hi[a].to_bits().hash(&mut hasher);
            self.n[a].hash(&mut hasher);
        }
        hasher.finish()
    }

    /// Nodes per axis (n + 1).
    fn points(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.n[axis] + 1
        } else {
            1
        }
    }

    pub fn node_count(&self) -> usize {
        self.points(0) * self.points(1)
    }

    pub fn interior_count(&self) -> usize {
        (0..self.dim).map(|a| self.n[a] - 1).product()
    }

    pub fn boundary_count(&self) -> usize {
        self.node_count() - self.interior_count()
    }

    /// Per-axis index of a node.
    pub fn node_ijk(&self, node: usize) -> [usize; 2] {
        let px = self.points(0);
        [node % px, node / px]
    }

    pub fn node_index(&self, ij: [usize; 2]) -> usize {
        ij[0] + self.points(0) * ij[1]
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let ij = self.node_ijk(node);
        let mut c = [0.0; 2];
        for a in 0..self.dim {
            c[a] = self.lo[a] + ij[a] as f64 * self.h[a];
        }
        c
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let ij = self.node_ijk(node);
        (0..self.dim).any(|a| ij[a] == 0 || ij[a] == self.n[a])
    }

    /// Dense interior numbering of a node, `None` on the boundary.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        if self.is_boundary(node) {
            return None;
        }
        let ij = self.node_ijk(node);
        let nx = self.n[0] - 1;
        Some(match self.dim {
            1 => ij[0] - 1,
            _ => (ij[0] - 1) + nx * (ij[1] - 1),
        })
    }

    /// Inverse of [`Grid::interior_index`].
    pub fn interior_node(&self, k: usize) -> usize {
        let nx = self.n[0] - 1;
        match self.dim {
            1 => k + 1,
            _ => self.node_index([k % nx + 1, k / nx + 1]),
        }
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.interior_count()).map(move |k| self.interior_node(k))
    }

    /// Dense numbering of boundary nodes in canonical order.
    pub fn boundary_index_map(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        (0..self.node_count())
            .map(|node| {
                if self.is_boundary(node) {
                    next += 1;
                    Some(next - 1)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Node offset by `step` along `axis`, if it stays on the grid.
    pub fn neighbor(&self, node: usize, axis: usize, step: isize) -> Option<usize> {
        let mut ij = self.node_ijk(node);
        let v = ij[axis] as isize + step;
        if v < 0 || v > self.n[axis] as isize {
            return None;
        }
        ij[axis] = v as usize;
        Some(self.node_index(ij))
    }
}

/// Subset Ω₀ of the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainMask {
    pub grid_id: u64,
    pub inside: Vec<bool>,
}

impl SubdomainMask {
    pub fn full(grid: &Grid) -> SubdomainMask {
        SubdomainMask {
            grid_id: grid.id(),
            inside: vec![true; grid.interior_count()],
        }
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|b| **b).count()
    }

    pub fn is_full(&self) -> bool {
        self.inside.iter().all(|b| *b)
    }

    pub fn union(&self, other: &SubdomainMask) -> SubdomainMask {
        SubdomainMask {
            grid_id: self.grid_id,
            inside: self
                .inside
                .iter()
                .zip(&other.inside)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }
}

/// Interior nodes strictly inside the box `[lo0, hi0]`.
pub fn sub_rectangle_mask(grid: &Grid, lo0: &[f64], hi0: &[f64]) -> Result<SubdomainMask> {
    let d = grid.dim();
    if lo0.len() != d || hi0.len() != d {
        return Err(Error::DimMismatch {
            expected: d,
            got: lo0.len().min(hi0.len()),
        });
    }
    for a in 0..d {
        if lo0[a] < grid.lo()[a] || hi0[a] > grid.hi()[a] || lo0[a] >= hi0[a] {
            return Err(Error::Validation(format!(
                "sub-rectangle axis {a} [{}, {}] not inside [{}, {}]",
                lo0[a],
                hi0[a],
                grid.lo()[a],
                grid.hi()[a]
            )));
        }
    }
    let inside: Vec<bool> = grid
        .interior_nodes()
        .map(|node| {
            let c = grid.coords(node);
            (0..d).all(|a| c[a] > lo0[a] && c[a] < hi0[a])
        })
        .collect();
    if !inside.iter().any(|b| *b) {
        return Err(Error::EmptySubdomain);
    }
    Ok(SubdomainMask {
        grid_id: grid.id(),
        inside,
    })
}

/// Breadth-first connectivity of the mask's true-set under 2·dim adjacency.
pub fn connected(grid: &Grid, mask: &SubdomainMask) -> bool {
    let Some(start) = mask.inside.iter().position(|b| *b) else {
        return false;
    };
    let mut seen = vec![false; mask.inside.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut reached = 1;
    while let Some(k) = queue.pop_front() {
        let node = grid.interior_node(k);
        for axis in 0..grid.dim() {
            for step in [-1, 1] {
                let Some(nb) = grid.neighbor(node, axis, step) else {
                    continue;
                };
                if let Some(j) = grid.interior_index(nb) {
                    if mask.inside[j] && !seen[j] {
                        seen[j] = true;
                        reached += 1;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    reached == mask.count()
}
