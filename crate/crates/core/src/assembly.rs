//! Finite-difference assembly of L + M.
//!
//! Divergence terms use a conservative flux form with arithmetic-mean face
//! coefficients, cross derivatives use centered differences, convection is
//! first-order upwind and reaction goes on the diagonal. Unknowns are
//! species-major: all nodes of species 1, then species 2, and so on.
//! Dirichlet neighbours are eliminated into `G`, so `A u + G g = f`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{sample_field, Expr};
use crate::linalg::SparseMat;
use crate::mesh::{Grid, SubdomainMask};
use crate::system::{DiscreteSystem, ScalarCoefficients, ScalarOperatorSpec};

/// Mapping between local unknowns and grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dofs {
    /// Grid node of each unknown.
    pub nodes: Vec<usize>,
    local: Vec<Option<usize>>,
}

impl Dofs {
    pub fn new(grid: &Grid, mask: Option<&SubdomainMask>) -> Dofs {
        let mut local = vec![None; grid.node_count()];
        let mut nodes = Vec::new();
        for (k, node) in grid.interior_nodes().enumerate() {
            if mask.is_none_or(|m| m.inside[k]) {
                local[node] = Some(nodes.len());
                nodes.push(node);
            }
        }
        Dofs { nodes, local }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn local(&self, node: usize) -> Option<usize> {
        self.local[node]
    }
}

/// Contributions of one stencil: unknown -> A, boundary node -> G.
struct Stencil {
    a: Vec<(usize, usize, f64)>,
    g: Vec<(usize, usize, f64)>,
}

fn scalar_stencil(
    op: &ScalarCoefficients,
    grid: &Grid,
    dofs: &Dofs,
    bmap: &[Option<usize>],
) -> Stencil {
    let d = grid.dim();
    let h = grid.spacing();
    let mut st = Stencil {
        a: Vec::with_capacity(dofs.len() * (1 + 2 * d + 4 * d * (d - 1))),
        g: Vec::new(),
    };
    for (row, &p) in dofs.nodes.iter().enumerate() {
        let mut push = |node: usize, v: f64| {
            if let Some(col) = dofs.local(node) {
                st.a.push((row, col, v));
            } else if let Some(b) = bmap[node] {
                st.g.push((row, b, v));
            }
            // interior nodes outside a mask carry zero Dirichlet data
        };
        let mut diag = op.c[p];
        for i in 0..d {
            let aii = op.a_entry(d, i, i);
            let hp = grid.neighbor(p, i, 1).unwrap();
            let hm = grid.neighbor(p, i, -1).unwrap();
            let a_plus = 0.5 * (aii[p] + aii[hp]);
            let a_minus = 0.5 * (aii[p] + aii[hm]);
            let h2 = h[i] * h[i];
            diag += (a_plus + a_minus) / h2;
            push(hp, -a_plus / h2);
            push(hm, -a_minus / h2);

            let bi = op.b[i][p];
            if bi >= 0.0 {
                diag += bi / h[i];
                push(hm, -bi / h[i]);
            } else {
                diag -= bi / h[i];
                push(hp, bi / h[i]);
            }
        }
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let aij = op.a_entry(d, i, j);
                for sj in [-1isize, 1] {
                    let q = grid.neighbor(p, j, sj).unwrap();
                    let coef = aij[q];
                    if coef == 0.0 {
                        continue;
                    }
                    for si in [-1isize, 1] {
                        let r = grid.neighbor(q, i, si).unwrap();
                        push(r, -(sj * si) as f64 * coef / (4.0 * h[i] * h[j]));
                    }
                }
            }
        }
        push(p, diag);
    }
    st
}

/// Discretizes one scalar operator on the interior (or on a mask, with zero
/// Dirichlet data on the mask boundary). Returns `(A, G)`.
pub fn assemble_scalar_sampled(
    op: &ScalarCoefficients,
    grid: &Grid,
    mask: Option<&SubdomainMask>,
) -> (SparseMat, SparseMat) {
    let dofs = Dofs::new(grid, mask);
    let bmap = grid.boundary_index_map();
    let st = scalar_stencil(op, grid, &dofs, &bmap);
    (
        SparseMat::from_triplets(dofs.len(), dofs.len(), st.a),
        SparseMat::from_triplets(dofs.len(), grid.boundary_count(), st.g),
    )
}

pub fn assemble_scalar(
    op: &ScalarOperatorSpec,
    grid: &Grid,
    mask: Option<&SubdomainMask>,
) -> Result<(SparseMat, SparseMat)> {
    check_ellipticity(op, grid)?;
    let sampled = op.sample(grid)?;
    Ok(assemble_scalar_sampled(&sampled, grid, mask))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingMode {
    Full,
    /// Only `M⁻ = min(m, 0)` (diagonal included).
    CooperativeOnly,
    /// Sampled replacement coupling, `N×N` fields.
    Custom(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub a: SparseMat,
    pub g_mat: SparseMat,
    pub f_vec: Vec<f64>,
    pub g_vec: Vec<f64>,
    pub z_matrix: bool,
    pub offdiag_max: f64,
    pub n_species: usize,
    pub dofs: Dofs,
}

impl AssembledSystem {
    /// Unknowns per species.
    pub fn block_size(&self) -> usize {
        self.dofs.len()
    }

    pub fn dof(&self) -> usize {
        self.a.n_rows()
    }
}

/// Pointwise `(M⁺, M⁻)` with `M⁺ = max(m, 0)`, `M⁻ = min(m, 0)`.
pub type SplitCoupling = (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>);

pub fn split_sampled(m: &[Vec<Vec<f64>>]) -> SplitCoupling {
    let part = |f: fn(f64) -> f64| -> Vec<Vec<Vec<f64>>> {
        m.iter()
            .map(|row| {
                row.iter()
                    .map(|field| field.iter().map(|v| f(*v)).collect())
                    .collect()
            })
            .collect()
    };
    (part(|v| v.max(0.0)), part(|v| v.min(0.0)))
}

pub fn split_coupling(m: &[Vec<Expr>], grid: &Grid) -> Result<SplitCoupling> {
    let sampled: Vec<Vec<Vec<f64>>> = m
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| sample_field(e, grid).map(|f| f.values))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    Ok(split_sampled(&sampled))
}

pub fn assemble_system(
    sys: &DiscreteSystem,
    mode: &CouplingMode,
    mask: Option<&SubdomainMask>,
) -> Result<AssembledSystem> {
    let grid = &sys.grid;
    let n = sys.n_species();
    let coupling: Vec<Vec<Vec<f64>>> = match mode {
        CouplingMode::Full => sys.m.clone(),
        CouplingMode::CooperativeOnly => split_sampled(&sys.m).1,
        CouplingMode::Custom(m) => {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(Error::DimMismatch {
                    expected: n,
                    got: m.len(),
                });
            }
            m.clone()
        }
    };
    for op in &sys.ops {
        check_ellipticity_sampled(op, grid)?;
    }
    let dofs = Dofs::new(grid, mask);
    let bmap = grid.boundary_index_map();
    let nb = grid.boundary_count();
    let nu = dofs.len();
    let mut at = Vec::new();
    let mut gt = Vec::new();
    for (k, op) in sys.ops.iter().enumerate() {
        let st = scalar_stencil(op, grid, &dofs, &bmap);
        at.extend(st.a.into_iter().map(|(r, c, v)| (k * nu + r, k * nu + c, v)));
        gt.extend(st.g.into_iter().map(|(r, c, v)| (k * nu + r, k * nb + c, v)));
        for (l, field) in coupling[k].iter().enumerate() {
            for (local, &node) in dofs.nodes.iter().enumerate() {
                let v = field[node];
                if v != 0.0 {
                    at.push((k * nu + local, l * nu + local, v));
                }
            }
        }
    }
    let a = SparseMat::from_triplets(n * nu, n * nu, at);
    let g_mat = SparseMat::from_triplets(n * nu, n * nb, gt);
    let z = check_z_matrix(&a, n, nu);
    let f_vec = (0..n)
        .flat_map(|k| dofs.nodes.iter().map(move |&node| sys.f[k][node]))
        .collect();
    let g_vec = (0..n)
        .flat_map(|k| {
            (0..grid.node_count())
                .filter(|node| bmap[*node].is_some())
                .map(move |node| sys.g[k][node])
        })
        .collect();
    let offdiag_max = a
        .triplets()
        .filter(|(i, j, _)| i != j)
        .map(|(_, _, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AssembledSystem {
        a,
        g_mat,
        f_vec,
        g_vec,
        z_matrix: z.is_z,
        offdiag_max: if offdiag_max.is_finite() { offdiag_max } else { 0.0 },
        n_species: n,
        dofs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZWitness {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    /// Species block `(k, l)` of the entry.
    pub block: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZCheck {
    pub is_z: bool,
    /// Largest off-diagonal entry.
    pub worst: Option<ZWitness>,
}

/// Z-matrix test: every off-diagonal entry ≤ 1e-14·‖A‖∞.
pub fn check_z_matrix(a: &SparseMat, blocks: usize, n_int: usize) -> ZCheck {
    let tol = 1e-14 * a.norm_inf();
    let worst = a
        .triplets()
        .filter(|(i, j, _)| i != j)
        .max_by(|x, y| x.2.total_cmp(&y.2))
        .map(|(row, col, value)| {
            let nb = n_int.max(1);
            ZWitness {
                row,
                col,
                value,
                block: ((row / nb).min(blocks.saturating_sub(1)), (col / nb).min(blocks.saturating_sub(1))),
            }
        });
    ZCheck {
        is_z: worst.is_none_or(|w| w.value <= tol),
        worst,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipticity {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Largest `|a_ij - a_ji|`; above 1e-10 the caller should warn.
    pub max_asymmetry: f64,
}

pub fn check_ellipticity_sampled(op: &ScalarCoefficients, grid: &Grid) -> Result<Ellipticity> {
    let d = grid.dim();
    let mut out = Ellipticity {
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
        max_asymmetry: 0.0,
    };
    for node in 0..grid.node_count() {
        let (lo, hi) = if d == 1 {
            let v = op.a[0][node];
            (v, v)
        } else {
            let a11 = op.a_entry(2, 0, 0)[node];
            let a22 = op.a_entry(2, 1, 1)[node];
            let a12 = op.a_entry(2, 0, 1)[node];
            let a21 = op.a_entry(2, 1, 0)[node];
            out.max_asymmetry = out.max_asymmetry.max((a12 - a21).abs());
            let s = 0.5 * (a12 + a21);
            let mean = 0.5 * (a11 + a22);
            let rad = (0.25 * (a11 - a22).powi(2) + s * s).sqrt();
            (mean - rad, mean + rad)
        };
        if !(lo > 0.0) {
            return Err(Error::NonEllipticCoefficient {
                node,
                lambda_min: lo,
            });
        }
        out.lambda_min = out.lambda_min.min(lo);
        out.lambda_max = out.lambda_max.max(hi);
    }
    Ok(out)
}

/// Extreme eigenvalues of the symmetrized diffusion tensor over all nodes.
pub fn check_ellipticity(op: &ScalarOperatorSpec, grid: &Grid) -> Result<Ellipticity> {
    check_ellipticity_sampled(&op.sample(grid)?, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::mesh::sub_rectangle_mask;
    use crate::system::SystemSpec;
    use std::f64::consts::PI;

    fn op_1d(a: &str, b: &str, c: &str) -> ScalarOperatorSpec {
        ScalarOperatorSpec {
            a: vec![vec![parse_expr(a).unwrap()]],
            b: vec![parse_expr(b).unwrap()],
            c: parse_expr(c).unwrap(),
        }
    }

    fn op_2d(a: [[&str; 2]; 2]) -> ScalarOperatorSpec {
        ScalarOperatorSpec {
            a: a.iter()
                .map(|r| r.iter().map(|s| parse_expr(s).unwrap()).collect())
                .collect(),
            b: vec![Expr::constant(0.0); 2],
            c: Expr::constant(0.0),
        }
    }

    #[test]
    fn three_point_laplacian() {
        let g = Grid::new_1d(0.0, 1.0, 4).unwrap();
        let (a, gm) = assemble_scalar(&op_1d("1", "0", "0"), &g, None).unwrap();
        assert_eq!(
            a.to_dense(),
            vec![
                vec![32.0, -16.0, 0.0],
                vec![-16.0, 32.0, -16.0],
                vec![0.0, -16.0, 32.0]
            ]
        );
        assert_eq!(gm.get(0, 0), -16.0);
        assert_eq!(gm.get(2, 1), -16.0);
        let (a5, _) = assemble_scalar(&op_1d("1", "0", "5"), &g, None).unwrap();
        assert_eq!(a5.diagonal(), vec![37.0; 3]);
    }

    #[test]
    fn upwind_keeps_z_structure() {
        // b = 10 > 0: backward difference, so only the left neighbour picks up -b/h
        let g = Grid::new_1d(0.0, 1.0, 4).unwrap();
        let (a, _) = assemble_scalar(&op_1d("1", "10", "0"), &g, None).unwrap();
        assert_eq!(a.get(1, 0), -16.0 - 40.0);
        assert_eq!(a.get(1, 2), -16.0);
        assert_eq!(a.get(1, 1), 32.0 + 40.0);
        assert!(check_z_matrix(&a, 1, 3).is_z);
        let (a, _) = assemble_scalar(&op_1d("1", "-10", "0"), &g, None).unwrap();
        assert_eq!(a.get(1, 2), -16.0 - 40.0);
        assert_eq!(a.get(1, 0), -16.0);
        let (a, _) = assemble_scalar(&op_1d("1", "100*sin(7*x)", "0"), &g, None).unwrap();
        assert!(check_z_matrix(&a, 1, 3).is_z);
    }

    #[test]
    fn second_order_consistency() {
        let err = |n: usize| {
            let g = Grid::new_1d(0.0, PI, n).unwrap();
            let (a, _) = assemble_scalar(&op_1d("1", "0", "0"), &g, None).unwrap();
            let u: Vec<f64> = g.interior_nodes().map(|p| g.coords(p)[0].sin()).collect();
            let au = a.matvec(&u).unwrap();
            au.iter().zip(&u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e2 <= 0.3 * e1, "{e1} {e2}");
    }

    #[test]
    fn conservative_row_sums() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 2.0], [6, 7]).unwrap();
        let op = op_2d([["1 + x*y", "0.2*x"], ["0.2*x", "2 + sin(y)"]]);
        let (a, gm) = assemble_scalar(&op, &g, None).unwrap();
        let ones_int = vec![1.0; a.n_cols()];
        let ones_bdy = vec![1.0; gm.n_cols()];
        let ra = a.matvec(&ones_int).unwrap();
        let rg = gm.matvec(&ones_bdy).unwrap();
        let scale = a.norm_inf();
        for (x, y) in ra.iter().zip(&rg) {
            assert!((x + y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn cross_derivatives_can_break_z() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [5, 5]).unwrap();
        let (a, _) = assemble_scalar(&op_2d([["1", "0.5"], ["0.5", "1"]]), &g, None).unwrap();
        assert!(!check_z_matrix(&a, 1, a.n_rows()).is_z);
        let (a, _) = assemble_scalar(&op_2d([["1", "0"], ["0", "3"]]), &g, None).unwrap();
        assert!(check_z_matrix(&a, 1, a.n_rows()).is_z);
    }

    #[test]
    fn mask_assembly_is_zero_dirichlet() {
        let g = Grid::new_1d(0.0, 1.0, 8).unwrap();
        let m = sub_rectangle_mask(&g, &[0.25], &[0.75]).unwrap();
        let (a, gm) = assemble_scalar(&op_1d("1", "0", "0"), &g, Some(&m)).unwrap();
        assert_eq!(a.n_rows(), 3);
        assert_eq!(a.get(0, 0), 128.0);
        assert_eq!(gm.nnz(), 0);
    }

    #[test]
    fn block_coupling() {
        let g = Grid::new_1d(0.0, PI, 8).unwrap();
        let sys = SystemSpec::laplacians(g.clone(), 2)
            .with_coupling(vec![vec![0.0, -1.0], vec![-1.0, 0.0]])
            .sample()
            .unwrap();
        let asys = assemble_system(&sys, &CouplingMode::Full, None).unwrap();
        let n = 7;
        for i in 0..n {
            assert_eq!(asys.a.get(i, n + i), -1.0);
            assert_eq!(asys.a.get(n + i, i), -1.0);
        }
        assert!(asys.z_matrix);

        let comp = sys.with_coupling(
            split_sampled(&SystemSpec::laplacians(g.clone(), 2)
                .with_coupling(vec![vec![0.0, 1.0], vec![1.0, 0.0]])
                .sample()
                .unwrap()
                .m)
            .0,
        );
        let asys = assemble_system(&comp, &CouplingMode::Full, None).unwrap();
        assert!(!asys.z_matrix);
        assert_eq!(asys.offdiag_max, 1.0);

        let pp = SystemSpec::laplacians(g, 2)
            .with_coupling(vec![vec![0.0, 1.0], vec![-2.0, 0.0]])
            .sample()
            .unwrap();
        let asys = assemble_system(&pp, &CouplingMode::CooperativeOnly, None).unwrap();
        for i in 0..n {
            assert_eq!(asys.a.get(i, n + i), 0.0);
            assert_eq!(asys.a.get(n + i, i), -2.0);
        }
        assert!(asys.z_matrix);
    }

    #[test]
    fn splitting_examples() {
        let g = Grid::new_1d(0.0, PI, 8).unwrap();
        let c = |v: f64| Expr::constant(v);
        let (p, m) = split_coupling(&[vec![c(1.0), c(-2.0)], vec![c(3.0), c(0.0)]], &g).unwrap();
        assert!(p[0][0].iter().all(|v| *v == 1.0) && p[0][1].iter().all(|v| *v == 0.0));
        assert!(p[1][0].iter().all(|v| *v == 3.0) && m[0][1].iter().all(|v| *v == -2.0));
        assert!(m[0][0].iter().all(|v| *v == 0.0) && m[1][0].iter().all(|v| *v == 0.0));

        let sin = parse_expr("sin(x)").unwrap();
        let (p, m) = split_coupling(&[vec![c(0.0), sin]], &g).unwrap();
        for node in g.interior_nodes() {
            assert_eq!(p[0][1][node], g.coords(node)[0].sin());
            assert_eq!(m[0][1][node], 0.0);
        }
        let (p, _) = split_coupling(&[vec![c(-1.0), parse_expr("-x^2").unwrap()]], &g).unwrap();
        assert!(p.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn ellipticity_examples() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        let e = check_ellipticity(&op_2d([["1", "0"], ["0", "1"]]), &g).unwrap();
        assert_eq!((e.lambda_min, e.lambda_max), (1.0, 1.0));
        // eigenvalues 1 ± 2
        assert!(matches!(
            check_ellipticity(&op_2d([["1", "2"], ["2", "1"]]), &g),
            Err(Error::NonEllipticCoefficient { lambda_min, .. }) if (lambda_min + 1.0).abs() < 1e-15
        ));
        let e = check_ellipticity(&op_2d([["2", "0"], ["0", "3"]]), &g).unwrap();
        assert_eq!((e.lambda_min, e.lambda_max), (2.0, 3.0));
        let e = check_ellipticity(&op_2d([["2", "0.1"], ["0", "3"]]), &g).unwrap();
        assert!(e.max_asymmetry > 1e-10);
    }

    #[test]
    fn z_check_examples() {
        let g = Grid::new_1d(0.0, 1.0, 6).unwrap();
        let (lap, _) = assemble_scalar(&op_1d("1", "0", "0"), &g, None).unwrap();
        assert!(check_z_matrix(&lap, 1, 5).is_z);
        let mut t: Vec<_> = lap.triplets().collect();
        let n = 5;
        t.extend(lap.triplets().map(|(i, j, v)| (i + n, j + n, v)));
        t.extend((0..n).map(|i| (i, i + n, 1.0)));
        let coupled = SparseMat::from_triplets(2 * n, 2 * n, t);
        let z = check_z_matrix(&coupled, 2, n);
        assert!(!z.is_z);
        let w = z.worst.unwrap();
        assert_eq!((w.value, w.block), (1.0, (0, 1)));
        assert!(check_z_matrix(&SparseMat::identity(3), 1, 3).is_z);
    }
}
