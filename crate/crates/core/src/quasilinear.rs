//! Quasi-linear systems `-div a^l(x, u^l, Du^l) + F^l(x, u, Du^l) = f^l`.
//!
//! Given a sub-solution `u` and a super-solution `v` on the grid, the
//! difference `u - v` satisfies a linear system whose coefficients are
//! averages of partial derivatives of `a` and `F` along the segment from `v`
//! to `u`. That linear system is handed to the certifier.

use serde::Serialize;

use crate::certify::{check_thm3, check_thm4, classify_structure, Mode, Verdict};
use crate::certify::{CouplingParts, StructureClass};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};
use crate::mesh::Grid;
use crate::par::{self, Exec};
use crate::settings::Settings;
use crate::system::{DiscreteSystem, ScalarCoefficients};

/// How partial derivatives of `a` and `F` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Partials {
    /// Central differences with step `1e-6 (1 + |arg|)`.
    #[default]
    FiniteDifference,
    /// Symbolic derivatives of the expressions; central differences are
    /// kept for expressions that use `abs`, `min` or `max`.
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiSpec {
    pub grid: Grid,
    /// `flux[l][i] = a^{li}(x, u, p1, p2)`.
    pub flux: Vec<Vec<Expr>>,
    /// `reaction[l] = F^l(x, u1..uN, p1, p2)`; `u` is the own species and
    /// `p` its gradient.
    pub reaction: Vec<Expr>,
    pub f: Vec<Expr>,
    pub g: Vec<Expr>,
    pub partials: Partials,
}

impl QuasiSpec {
    pub fn n_species(&self) -> usize {
        self.flux.len()
    }

    /// `-div(A Du) + M u` written in quasi-linear form with linear flux
    /// `a^{li} = Σ_j A_l[j][i] p_j` and reaction `F^l = Σ_k m_lk u_k`.
    pub fn linear(grid: Grid, diffusion: &[Vec<Vec<f64>>], m: &[Vec<f64>]) -> QuasiSpec {
        let d = grid.dim();
        let n = m.len();
        let flux = diffusion
            .iter()
            .map(|a| {
                (0..d)
                    .map(|i| sum_terms((0..d).map(|j| (a[j][i], Expr::var(Var::P(j + 1))))))
                    .collect()
            })
            .collect();
        let reaction = m
            .iter()
            .map(|row| sum_terms((0..n).map(|k| (row[k], Expr::var(Var::Species(k + 1))))))
            .collect();
        QuasiSpec {
            grid,
            flux,
            reaction,
            f: vec![Expr::constant(0.0); n],
            g: vec![Expr::constant(0.0); n],
            partials: Partials::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_species();
        let d = self.grid.dim();
        if n == 0 {
            return Err(Error::Validation("no species".into()));
        }
        if self.reaction.len() != n || self.f.len() != n || self.g.len() != n {
            return Err(Error::Validation("flux, reaction, f and g need one entry per species".into()));
        }
        for (l, a) in self.flux.iter().enumerate() {
            if a.len() != d {
                return Err(Error::Validation(format!(
                    "species {}: flux needs {d} components",
                    l + 1
                )));
            }
        }
        let check = |e: &Expr, species_ok: bool| -> Result<()> {
            for v in e.vars() {
                let ok = match v {
                    Var::X => true,
                    Var::U => !species_ok,
                    Var::Y | Var::P(2) => d == 2,
                    Var::P(_) => true,
                    Var::Species(k) => species_ok && k >= 1 && k <= n,
                };
                if !ok {
                    return Err(Error::Validation(format!("variable {v:?} not allowed in `{e}`")));
                }
            }
            Ok(())
        };
        for e in self.flux.iter().flatten() {
            check(e, false)?;
        }
        for e in &self.reaction {
            check(e, true)?;
        }
        for e in self.f.iter().chain(&self.g) {
            e.validate_spatial(d).map_err(Error::Validation)?;
        }
        Ok(())
    }
}

fn sum_terms(terms: impl Iterator<Item = (f64, Expr)>) -> Expr {
    use crate::expr::BinOp;
    terms
        .filter(|(c, _)| *c != 0.0)
        .map(|(c, e)| if c == 1.0 { e } else { Expr::bin(BinOp::Mul, Expr::constant(c), e) })
        .reduce(|a, b| Expr::bin(BinOp::Add, a, b))
        .unwrap_or(Expr::constant(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quadrature {
    pub rule: &'static str,
    pub points: usize,
}

/// Segment-averaged coefficients, one value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub grid: Grid,
    /// `b[l][i * dim + j] = ∫ ∂a^{li}/∂p_j ds`.
    pub b: Vec<Vec<Vec<f64>>>,
    /// `b0[l][i] = ∫ ∂a^{li}/∂u ds`.
    pub b0: Vec<Vec<Vec<f64>>>,
    /// `e[l][k] = ∫ ∂F^l/∂u^k ds`.
    pub e: Vec<Vec<Vec<f64>>>,
    /// `h[l][i] = ∫ ∂F^l/∂p_i ds`.
    pub h: Vec<Vec<Vec<f64>>>,
    pub quadrature: Quadrature,
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
const GAUSS5: [(f64, f64); 5] = {
    const X1: f64 = 0.538_469_310_105_683_1;
    const X2: f64 = 0.906_179_845_938_664;
    const W0: f64 = 128.0 / 225.0;
    const W1: f64 = 0.478_628_670_499_366_2;
    const W2: f64 = 0.236_926_885_056_189_42;
    [
        ((1.0 - X2) / 2.0, W2 / 2.0),
        ((1.0 - X1) / 2.0, W1 / 2.0),
        (0.5, W0 / 2.0),
        ((1.0 + X1) / 2.0, W1 / 2.0),
        ((1.0 + X2) / 2.0, W2 / 2.0),
    ]
};

/// Gradient of a node field: centered inside, one-sided along boundary axes.
pub fn node_gradient(grid: &Grid, field: &[f64], node: usize) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (axis, out) in g.iter_mut().enumerate().take(grid.dim()) {
        let h = grid.spacing()[axis];
        let prev = grid.neighbor(node, axis, -1);
        let next = grid.neighbor(node, axis, 1);
        *out = match (prev, next) {
            (Some(p), Some(n)) => (field[n] - field[p]) / (2.0 * h),
            (None, Some(n)) => (field[n] - field[node]) / h,
            (Some(p), None) => (field[node] - field[p]) / h,
            (None, None) => 0.0,
        };
    }
    g
}

/// A partial derivative, symbolic when available.
struct Partial<'a> {
    expr: &'a Expr,
    closed: Option<Expr>,
    var: Var,
}

impl<'a> Partial<'a> {
    fn new(expr: &'a Expr, var: Var, mode: Partials) -> Self {
        let closed = match mode {
            Partials::ClosedForm => expr.derivative(var),
            Partials::FiniteDifference => None,
        };
        Partial { expr, closed, var }
    }

    fn eval(&self, env: &Env) -> Result<f64> {
        if !self.expr.depends_on(self.var) {
            return Ok(0.0);
        }
        if let Some(d) = &self.closed {
            return Ok(d.eval(env)?);
        }
        central_difference(self.expr, self.var, env)
    }
}

/// `(e(t + h) - e(t - h)) / 2h` with `h = 1e-6 (1 + |t|)`.
pub fn central_difference(e: &Expr, var: Var, env: &Env) -> Result<f64> {
    let mut species = env.species.to_vec();
    let t = match var {
        Var::X => env.coords[0],
        Var::Y => env.coords[1],
        Var::U => env.u,
        Var::P(i) => env.p[i - 1],
        Var::Species(k) => species[k - 1],
    };
    let h = 1e-6 * (1.0 + t.abs());
    let mut at = |value: f64| -> Result<f64> {
        let mut local = Env { species: &[], ..*env };
        match var {
            Var::X => local.coords[0] = value,
            Var::Y => local.coords[1] = value,
            Var::U => local.u = value,
            Var::P(i) => local.p[i - 1] = value,
            Var::Species(k) => species[k - 1] = value,
        }
        local.species = &species;
        let out = e.eval(&local)?;
        Ok(out)
    };
    let hi = at(t + h)?;
    let lo = at(t - h)?;
    Ok((hi - lo) / (2.0 * h))
}

struct SpeciesPartials<'a> {
    /// `[i][j]`: `∂a^{li}/∂p_j`.
    flux_p: Vec<Vec<Partial<'a>>>,
    flux_u: Vec<Partial<'a>>,
    react_u: Vec<Partial<'a>>,
    react_p: Vec<Partial<'a>>,
}

struct NodeCoefficients {
    b: Vec<Vec<f64>>,
    b0: Vec<Vec<f64>>,
    e: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
}

fn smallest_sym_eigenvalue(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        _ => {
            let (a, d) = (m[0][0], m[1][1]);
            let b = 0.5 * (m[0][1] + m[1][0]);
            let mean = 0.5 * (a + d);
            mean - (0.25 * (a - d).powi(2) + b * b).sqrt()
        }
    }
}

/// Segment-averaged coefficients of the difference `u - v`.
///
/// `u` and `v` are per-species node fields on `qs.grid`.
pub fn linearize(qs: &QuasiSpec, u: &[Vec<f64>], v: &[Vec<f64>]) -> Result<LinearizedSystem> {
    linearize_with(qs, u, v, Exec::default())
}

pub fn linearize_with(
    qs: &QuasiSpec,
    u: &[Vec<f64>],
    v: &[Vec<f64>],
    exec: Exec,
) -> Result<LinearizedSystem> {
    qs.validate()?;
    let grid = &qs.grid;
    let n = qs.n_species();
    let d = grid.dim();
    let nodes = grid.node_count();
    for field in u.iter().chain(v) {
        if field.len() != nodes {
            return Err(Error::DimMismatch {
                expected: nodes,
                got: field.len(),
            });
        }
    }
    if u.len() != n || v.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: u.len().min(v.len()),
        });
    }
    let mode = qs.partials;
    let partials: Vec<SpeciesPartials> = (0..n)
        .map(|l| SpeciesPartials {
            flux_p: (0..d)
                .map(|i| (0..d).map(|j| Partial::new(&qs.flux[l][i], Var::P(j + 1), mode)).collect())
                .collect(),
            flux_u: (0..d).map(|i| Partial::new(&qs.flux[l][i], Var::U, mode)).collect(),
            react_u: (0..n)
                .map(|k| Partial::new(&qs.reaction[l], Var::Species(k + 1), mode))
                .collect(),
            react_p: (0..d).map(|i| Partial::new(&qs.reaction[l], Var::P(i + 1), mode)).collect(),
        })
        .collect();
    let du: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|l| (0..nodes).map(|x| node_gradient(grid, &u[l], x)).collect())
        .collect();
    let dv: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|l| (0..nodes).map(|x| node_gradient(grid, &v[l], x)).collect())
        .collect();

    let per_node = par::try_map_range(exec, nodes, |x| -> Result<NodeCoefficients> {
        let coords = grid.coords(x);
        let mut out = NodeCoefficients {
            b: vec![vec![0.0; d * d]; n],
            b0: vec![vec![0.0; d]; n],
            e: vec![vec![0.0; n]; n],
            h: vec![vec![0.0; d]; n],
        };
        let mut state = vec![0.0; n];
        for &(s, wq) in &GAUSS5 {
            for (k, st) in state.iter_mut().enumerate() {
                *st = v[k][x] + s * (u[k][x] - v[k][x]);
            }
            for l in 0..n {
                let mut p = [0.0; 2];
                for i in 0..d {
                    p[i] = dv[l][x][i] + s * (du[l][x][i] - dv[l][x][i]);
                }
                let env = Env {
                    coords,
                    u: state[l],
                    p,
                    species: &state,
                };
                let sp = &partials[l];
                let mut jac = vec![vec![0.0; d]; d];
                for i in 0..d {
                    for j in 0..d {
                        jac[i][j] = sp.flux_p[i][j].eval(&env).map_err(|e| at_node(e, x))?;
                        out.b[l][i * d + j] += wq * jac[i][j];
                    }
                    out.b0[l][i] += wq * sp.flux_u[i].eval(&env).map_err(|e| at_node(e, x))?;
                    out.h[l][i] += wq * sp.react_p[i].eval(&env).map_err(|e| at_node(e, x))?;
                }
                for k in 0..n {
                    out.e[l][k] += wq * sp.react_u[k].eval(&env).map_err(|e| at_node(e, x))?;
                }
                let lambda_min = smallest_sym_eigenvalue(&jac);
                if !(lambda_min > 0.0) {
                    return Err(Error::NonEllipticLinearization {
                        node: x,
                        species: l,
                        s,
                        lambda_min,
                    });
                }
            }
        }
        Ok(out)
    })?;

    let gather = |pick: &dyn Fn(&NodeCoefficients, usize, usize) -> f64, l: usize, width: usize| {
        (0..width)
            .map(|c| per_node.iter().map(|nc| pick(nc, l, c)).collect())
            .collect::<Vec<Vec<f64>>>()
    };
    Ok(LinearizedSystem {
        grid: grid.clone(),
        b: (0..n).map(|l| gather(&|nc, l, c| nc.b[l][c], l, d * d)).collect(),
        b0: (0..n).map(|l| gather(&|nc, l, c| nc.b0[l][c], l, d)).collect(),
        e: (0..n).map(|l| gather(&|nc, l, c| nc.e[l][c], l, n)).collect(),
        h: (0..n).map(|l| gather(&|nc, l, c| nc.h[l][c], l, d)).collect(),
        quadrature: Quadrature {
            rule: "gauss-legendre",
            points: GAUSS5.len(),
        },
    })
}

fn at_node(e: Error, node: usize) -> Error {
    match e {
        Error::EvalDomain(err) => Error::EvalDomainAt { err, node },
        other => other,
    }
}

impl LinearizedSystem {
    pub fn n_species(&self) -> usize {
        self.b.len()
    }

    /// The linear system satisfied by `u - v`, in the form
    /// `-Σ D_j(a^{ij} D_i w) + Σ b^i D_i w + Σ m_lk w^k` with zero data.
    ///
    /// `a_l^{ij} = B_i^{lj}`, `b_l^i = H_i^l - B_0^{li}`,
    /// `m_ll = E_l^l - Σ_i D_i B_0^{li}`, `m_lk = E_k^l`.
    pub fn to_system(&self) -> DiscreteSystem {
        let grid = &self.grid;
        let d = grid.dim();
        let n = self.n_species();
        let nodes = grid.node_count();
        let ops = (0..n)
            .map(|l| {
                let mut a = vec![Vec::new(); d * d];
                for i in 0..d {
                    for j in 0..d {
                        a[i * d + j] = self.b[l][j * d + i].clone();
                    }
                }
                let b = (0..d)
                    .map(|i| (0..nodes).map(|x| self.h[l][i][x] - self.b0[l][i][x]).collect())
                    .collect();
                ScalarCoefficients {
                    a,
                    b,
                    c: vec![0.0; nodes],
                }
            })
            .collect();
        let m = (0..n)
            .map(|l| {
                (0..n)
                    .map(|k| {
                        let mut field = self.e[l][k].clone();
                        if k == l {
                            for (x, val) in field.iter_mut().enumerate() {
                                let div: f64 = (0..d)
                                    .map(|i| node_gradient(grid, &self.b0[l][i], x)[i])
                                    .sum();
                                *val -= div;
                            }
                        }
                        field
                    })
                    .collect()
            })
            .collect();
        DiscreteSystem {
            grid: grid.clone(),
            ops,
            m,
            f: vec![vec![0.0; nodes]; n],
            g: vec![vec![0.0; nodes]; n],
        }
    }
}

/// Linearizes and runs the matching sufficient condition: the irreducible
/// cooperative-part conditions when `E⁻` couples all species, the
/// per-component ones otherwise.
pub fn check_thm8(
    qs: &QuasiSpec,
    u: &[Vec<f64>],
    v: &[Vec<f64>],
    mode: Mode,
    set: &Settings,
) -> Result<Verdict> {
    let lin = linearize_with(qs, u, v, set.exec)?;
    let sys = lin.to_system();
    for (l, op) in sys.ops.iter().enumerate() {
        let ell = crate::assembly::check_ellipticity_sampled(op, &sys.grid)?;
        if !(ell.lambda_min > 0.0) {
            return Err(Error::NonEllipticLinearization {
                node: 0,
                species: l,
                s: f64::NAN,
                lambda_min: ell.lambda_min,
            });
        }
    }
    let parts = CouplingParts::new(&sys);
    let structure = classify_structure(&sys, set.support_tol);
    let irreducible = sys.n_species() > 1
        && crate::graph::is_strongly_connected(&parts.minus_digraph(set.support_tol));
    let (mut verdict, via) = if irreducible {
        (check_thm3(&sys, mode, set)?, 3)
    } else {
        match check_thm4(&sys, mode, set) {
            Ok(v) => (v, 4),
            Err(Error::StructureUnsupported(msg)) => {
                let mut v = Verdict::new(crate::certify::VerdictKind::Inconclusive, Some(8), structure, mode);
                v.notes.push(msg);
                return Ok(label(v, None));
            }
            Err(e) => return Err(e),
        }
    };
    if matches!(verdict.structure, StructureClass::Cooperative) {
        verdict.notes.push("linearized system is cooperative".into());
    }
    verdict.theorem = Some(8);
    Ok(label(verdict, Some(via)))
}

fn label(mut v: Verdict, via: Option<u8>) -> Verdict {
    v.label = match via {
        Some(t) => format!("sufficient condition (Thm8 via Thm{t})"),
        None => "none (Thm8)".into(),
    };
    v
}
