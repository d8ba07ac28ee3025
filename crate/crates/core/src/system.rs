//! Problem description L_M u = L u + M u with Dirichlet data, in expression
//! form ([`SystemSpec`]) and sampled on the grid ([`DiscreteSystem`]).

use crate::error::{Error, Result};
use crate::expr::{sample_field, Expr};
use crate::mesh::Grid;

/// `-div(a grad u) + b . grad u + c u` for one species.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarOperatorSpec {
    /// `a[i][j]` multiplies `D_j(. D_i u)`.
    pub a: Vec<Vec<Expr>>,
    pub b: Vec<Expr>,
    pub c: Expr,
}

impl ScalarOperatorSpec {
    /// `-Δ` in `dim` dimensions.
    pub fn laplacian(dim: usize) -> ScalarOperatorSpec {
        ScalarOperatorSpec {
            a: (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
                        .collect()
                })
                .collect(),
            b: vec![Expr::constant(0.0); dim],
            c: Expr::constant(0.0),
        }
    }

    fn exprs(&self) -> impl Iterator<Item = &Expr> {
        self.a
            .iter()
            .flatten()
            .chain(self.b.iter())
            .chain(std::iter::once(&self.c))
    }

    pub fn sample(&self, grid: &Grid) -> Result<ScalarCoefficients> {
        let d = grid.dim();
        let mut a = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                a.push(sample_field(&self.a[i][j], grid)?.values);
            }
        }
        Ok(ScalarCoefficients {
            a,
            b: self
                .b
                .iter()
                .map(|e| sample_field(e, grid).map(|f| f.values))
                .collect::<Result<_>>()?,
            c: sample_field(&self.c, grid)?.values,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub grid: Grid,
    pub ops: Vec<ScalarOperatorSpec>,
    /// `m[k][l]` couples species l into the equation of species k.
    pub m: Vec<Vec<Expr>>,
    pub f: Vec<Expr>,
    pub g: Vec<Expr>,
}

impl SystemSpec {
    /// `n` decoupled Laplacians with zero data.
    pub fn laplacians(grid: Grid, n: usize) -> SystemSpec {
        let d = grid.dim();
        SystemSpec {
            ops: vec![ScalarOperatorSpec::laplacian(d); n],
            m: vec![vec![Expr::constant(0.0); n]; n],
            f: vec![Expr::constant(0.0); n],
            g: vec![Expr::constant(0.0); n],
            grid,
        }
    }

    pub fn n_species(&self) -> usize {
        self.ops.len()
    }

    pub fn with_coupling(mut self, m: Vec<Vec<f64>>) -> SystemSpec {
        self.m = m
            .into_iter()
            .map(|row| row.into_iter().map(Expr::constant).collect())
            .collect();
        self
    }

    pub fn with_reaction(mut self, k: usize, c: Expr) -> SystemSpec {
        self.ops[k].c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_species();
        let d = self.grid.dim();
        if n == 0 {
            return Err(Error::Validation("no species".into()));
        }
        if self.m.len() != n || self.m.iter().any(|r| r.len() != n) {
            return Err(Error::Validation(format!("coupling matrix must be {n}x{n}")));
        }
        if self.f.len() != n || self.g.len() != n {
            return Err(Error::Validation("f and g need one entry per species".into()));
        }
        for (k, op) in self.ops.iter().enumerate() {
            if op.a.len() != d || op.a.iter().any(|r| r.len() != d) || op.b.len() != d {
                return Err(Error::Validation(format!(
                    "species {}: operator shape does not match dimension {d}",
                    k + 1
                )));
            }
        }
        let all = self
            .ops
            .iter()
            .flat_map(|op| op.exprs())
            .chain(self.m.iter().flatten())
            .chain(self.f.iter())
            .chain(self.g.iter());
        for e in all {
            e.validate_spatial(d).map_err(Error::Validation)?;
        }
        Ok(())
    }

    pub fn sample(&self) -> Result<DiscreteSystem> {
        self.validate()?;
        let grid = &self.grid;
        let field = |e: &Expr| sample_field(e, grid).map(|f| f.values);
        Ok(DiscreteSystem {
            grid: grid.clone(),
            ops: self
                .ops
                .iter()
                .map(|op| op.sample(grid))
                .collect::<Result<_>>()?,
            m: self
                .m
                .iter()
                .map(|row| row.iter().map(field).collect::<Result<_>>())
                .collect::<Result<_>>()?,
            f: self.f.iter().map(field).collect::<Result<_>>()?,
            g: self.g.iter().map(field).collect::<Result<_>>()?,
        })
    }
}

/// Coefficients sampled at every grid node (interior and boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCoefficients {
    /// `a[i * dim + j]`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl ScalarCoefficients {
    pub fn a_entry(&self, dim: usize, i: usize, j: usize) -> &[f64] {
        &self.a[i * dim + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    pub grid: Grid,
    pub ops: Vec<ScalarCoefficients>,
    pub m: Vec<Vec<Vec<f64>>>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
}

impl DiscreteSystem {
    pub fn n_species(&self) -> usize {
        self.ops.len()
    }

    /// Species reordered so that new species `i` is old species `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> DiscreteSystem {
        DiscreteSystem {
            grid: self.grid.clone(),
            ops: perm.iter().map(|&p| self.ops[p].clone()).collect(),
            m: perm
                .iter()
                .map(|&p| perm.iter().map(|&q| self.m[p][q].clone()).collect())
                .collect(),
            f: perm.iter().map(|&p| self.f[p].clone()).collect(),
            g: perm.iter().map(|&p| self.g[p].clone()).collect(),
        }
    }

    /// The subsystem made of the listed species (coupling restricted to them).
    pub fn restricted(&self, species: &[usize]) -> DiscreteSystem {
        self.permuted(species)
    }

    /// Replaces the coupling matrix.
    pub fn with_coupling(&self, m: Vec<Vec<Vec<f64>>>) -> DiscreteSystem {
        DiscreteSystem {
            m,
            ..self.clone()
        }
    }

    /// `m_kl` at interior node values only.
    pub fn coupling_interior(&self, k: usize, l: usize) -> impl Iterator<Item = f64> + '_ {
        let field = &self.m[k][l];
        self.grid.interior_nodes().map(move |n| field[n])
    }
}
