//! Principal eigenpairs of Z-matrices by shift-invert Perron iteration.

use serde::Serialize;

use crate::assembly::{assemble_system, check_z_matrix, CouplingMode};
use crate::error::{Error, Result};
use crate::graph::matrix_components;
use crate::linalg::{inf_norm, power_iteration_until, Interval, LuFactor, SparseMat};
use crate::mesh::{sub_rectangle_mask, SubdomainMask};
use crate::par;
use crate::settings::Settings;
use crate::system::DiscreteSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// Right eigenvector, positive with `max = 1`.
    pub right: Vec<f64>,
    /// Left eigenvector (eigenvector of the transpose), positive with `max = 1`.
    pub left: Vec<f64>,
    pub cw: Interval,
    /// Enclosure obtained from the transpose.
    pub left_cw: Interval,
    pub iterations: usize,
    /// `|A v - lambda v|_inf` for the right vector.
    pub residual: f64,
}

/// Serializable summary without the vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenSummary {
    pub lambda: f64,
    pub cw: Interval,
    pub iterations: usize,
    pub residual: f64,
    pub dof: usize,
}

impl EigenPair {
    pub fn summary(&self) -> EigenSummary {
        EigenSummary {
            lambda: self.lambda,
            cw: self.cw,
            iterations: self.iterations,
            residual: self.residual,
            dof: self.right.len(),
        }
    }
}

fn perron(b: &SparseMat, s: f64, set: &Settings) -> Result<(f64, Vec<f64>, Interval, usize)> {
    let tol = set.tol_eig;
    let r = power_iteration_until(b, set.max_iter, |cw, rho| {
        cw.width() <= tol * (1.0 + (s - rho).abs())
    })?;
    let cw = Interval {
        lo: s - r.cw.hi,
        hi: s - r.cw.lo,
    };
    Ok((s - r.rho, r.vector, cw, r.iterations))
}

/// Shift-invert iteration with `(A - σI)⁻¹`, `σ` below the principal
/// eigenvalue so the inverse stays positive. The enclosure is the
/// Collatz-Wielandt interval `[min (Av)_i/v_i, max (Av)_i/v_i]` of `A` itself.
/// `σ` follows the lower bound, which makes the iteration insensitive to
/// small spectral gaps.
fn inverse_perron(a: &SparseMat, set: &Settings) -> Result<(f64, Vec<f64>, Interval, usize)> {
    let n = a.n_rows();
    let row_min = (0..n)
        .map(|i| a.row(i).1.iter().sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let mut sigma = row_min - 1e-3 * (1.0 + row_min.abs());
    let mut lu = LuFactor::new(&a.add_identity(-sigma))?;
    let mut v = vec![1.0; n];
    let mut best = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    for it in 1..=set.max_iter.max(1) {
        let av = a.matvec(&v)?;
        let (mut lo, mut hi, mut num, mut den) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..n {
            let r = av[i] / v[i];
            lo = lo.min(r);
            hi = hi.max(r);
            num += v[i] * av[i];
            den += v[i] * v[i];
        }
        best = Interval {
            lo: best.lo.max(lo),
            hi: best.hi.min(hi),
        };
        let lambda = (num / den).clamp(best.lo, best.hi);
        if best.width() <= set.tol_eig * (1.0 + lambda.abs()) {
            return Ok((lambda, v, best, it));
        }
        let gap = best.width().max(1e-9 * (1.0 + best.lo.abs()));
        if best.lo - sigma > 4.0 * gap {
            sigma = best.lo - gap;
            lu = LuFactor::new(&a.add_identity(-sigma))?;
        }
        v = lu.solve(&v)?;
        let top = v.iter().cloned().fold(0.0f64, f64::max);
        if !(top > 0.0 && top.is_finite()) || v.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::NoConvergence {
                iterations: it,
                width: best.width(),
            });
        }
        v.iter_mut().for_each(|x| *x /= top);
    }
    Err(Error::NoConvergence {
        iterations: set.max_iter,
        width: best.width(),
    })
}

/// Shift-invert first, plain power iteration on `sI - A` if that fails.
fn principal_vector(
    a: &SparseMat,
    b: &SparseMat,
    s: f64,
    set: &Settings,
) -> Result<(f64, Vec<f64>, Interval, usize)> {
    inverse_perron(a, set).or_else(|_| perron(b, s, set))
}

/// Eigenvalue of smallest real part of a Z-matrix with strongly connected
/// digraph, with positive right and left eigenvectors.
pub fn principal_eigenpair(a: &SparseMat, set: &Settings) -> Result<EigenPair> {
    let n = a.n_rows();
    if !a.is_square() || n == 0 {
        return Err(Error::DimMismatch {
            expected: n,
            got: a.n_cols(),
        });
    }
    let z = check_z_matrix(a, 1, n);
    if !z.is_z {
        let w = z.worst.expect("non-Z matrix has an off-diagonal entry");
        return Err(Error::NotZMatrix {
            row: w.row,
            col: w.col,
            value: w.value,
        });
    }
    let comps = matrix_components(a).len();
    if comps > 1 {
        return Err(Error::NotIrreducible { components: comps });
    }
    let s = 1.0 + a.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max);
    // tiny positive off-diagonals below the Z tolerance are dropped
    let b = SparseMat::from_triplets(
        n,
        n,
        a.shifted_negation(s).triplets().map(|(i, j, v)| (i, j, v.max(0.0))).collect(),
    );
    let (lambda, right, cw, it_r) = principal_vector(a, &b, s, set)?;
    let (_, left, left_cw, it_l) = principal_vector(&a.transpose(), &b.transpose(), s, set)?;
    let av = a.matvec(&right)?;
    let residual = inf_norm(
        &av.iter()
            .zip(&right)
            .map(|(x, v)| x - lambda * v)
            .collect::<Vec<_>>(),
    );
    Ok(EigenPair {
        lambda,
        right,
        left,
        cw,
        left_cw,
        iterations: it_r.max(it_l),
        residual,
    })
}

/// Principal eigenpair of the assembled system with the given coupling,
/// optionally restricted to a mask.
pub fn system_eigen(
    sys: &DiscreteSystem,
    mode: &CouplingMode,
    mask: Option<&SubdomainMask>,
    set: &Settings,
) -> Result<EigenPair> {
    let asys = assemble_system(sys, mode, mask)?;
    principal_eigenpair(&asys.a, set)
}

/// Principal eigenpair of `L + M⁻`. The left vector is the adjoint
/// eigenfunction of the cooperative part.
pub fn cooperative_eigen(sys: &DiscreteSystem, set: &Settings) -> Result<EigenPair> {
    system_eigen(sys, &CouplingMode::CooperativeOnly, None, set)
}

/// Principal eigenpair of `L_j + m_jj⁻` (0-based `j`).
pub fn component_eigen(sys: &DiscreteSystem, j: usize, set: &Settings) -> Result<EigenPair> {
    if j >= sys.n_species() {
        return Err(Error::Validation(format!(
            "component {} out of range 1..={}",
            j + 1,
            sys.n_species()
        )));
    }
    cooperative_eigen(&sys.restricted(&[j]), set)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    pub level: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub lambda: f64,
    pub dof: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubdomainScan {
    /// First entry is the full domain.
    pub entries: Vec<ScanEntry>,
    pub min_lambda: f64,
    /// Every sub-rectangle eigenvalue is at least the full-domain one, up to tolerance.
    pub monotone_ok: bool,
}

fn level_intervals(lo: f64, hi: f64, level: usize) -> Vec<(f64, f64)> {
    let cells = 1usize << level;
    let w = (hi - lo) / cells as f64;
    let mut out: Vec<(f64, f64)> = (0..cells)
        .map(|k| (lo + k as f64 * w, lo + (k + 1) as f64 * w))
        .collect();
    // half-shifted cells, e.g. (0.25, 0.75) at level 1
    out.extend((0..cells - 1).map(|k| (lo + (k as f64 + 0.5) * w, lo + (k as f64 + 1.5) * w)));
    out
}

/// Cooperative eigenvalue on dyadic and half-shifted dyadic sub-rectangles
/// up to `depth` levels. Rectangles containing no node are skipped.
pub fn subdomain_scan(sys: &DiscreteSystem, depth: usize, set: &Settings) -> Result<SubdomainScan> {
    let grid = &sys.grid;
    let d = grid.dim();
    let mut rects: Vec<(usize, Vec<f64>, Vec<f64>)> =
        vec![(0, grid.lo().to_vec(), grid.hi().to_vec())];
    for level in 1..=depth {
        let axes: Vec<Vec<(f64, f64)>> = (0..d)
            .map(|a| level_intervals(grid.lo()[a], grid.hi()[a], level))
            .collect();
        if d == 1 {
            rects.extend(axes[0].iter().map(|&(l, h)| (level, vec![l], vec![h])));
        } else {
            for &(ly, hy) in &axes[1] {
                for &(lx, hx) in &axes[0] {
                    rects.push((level, vec![lx, ly], vec![hx, hy]));
                }
            }
        }
    }
    let inner = Settings {
        exec: par::Exec::Sequential,
        ..*set
    };
    let results = par::map_range(set.exec, rects.len(), |r| {
        let (level, lo, hi) = &rects[r];
        let mask = match sub_rectangle_mask(grid, lo, hi) {
            Ok(m) => m,
            Err(Error::EmptySubdomain) => return Ok(None),
            Err(e) => return Err(e),
        };
        let full = mask.is_full();
        let ep = system_eigen(
            sys,
            &CouplingMode::CooperativeOnly,
            (!full).then_some(&mask),
            &inner,
        )?;
        Ok(Some(ScanEntry {
            level: *level,
            lo: lo.clone(),
            hi: hi.clone(),
            lambda: ep.lambda,
            dof: ep.right.len(),
        }))
    });
    let mut entries = Vec::new();
    for r in results {
        if let Some(e) = r? {
            entries.push(e);
        }
    }
    let full = entries[0].lambda;
    let min_lambda = entries.iter().map(|e| e.lambda).fold(f64::INFINITY, f64::min);
    let monotone_ok = entries
        .iter()
        .all(|e| e.lambda >= full - set.tol_eig * (1.0 + full.abs()));
    Ok(SubdomainScan {
        entries,
        min_lambda,
        monotone_ok,
    })
}
