//! Direct inverse-positivity checks on assembled systems.
//!
//! The discrete comparison principle is taken to mean: `A` nonsingular,
//! `A⁻¹ ≥ 0` and `-A⁻¹G ≥ 0`. With a sign gauge `σ` the same test runs on
//! `DAD`, `D = diag(σ ⊗ 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::AssembledSystem;
use crate::error::{Error, Result};
use crate::linalg::{dense_inverse, inf_norm, LuFactor};
use crate::par;
use crate::settings::Settings;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    /// `None` for sampled reports that found no violation.
    pub inverse_positive: Option<bool>,
    pub sampled: bool,
    pub min_entry: f64,
    /// `(row, col)` of the minimum; for sampled reports `(row, trial)`.
    pub witness: Option<(usize, usize)>,
    pub boundary_monotone: Option<bool>,
    pub min_boundary_entry: Option<f64>,
    pub gauge: Option<Vec<i32>>,
    pub dof: usize,
    /// Largest inverse entry magnitude (or solution magnitude when sampled).
    pub scale: f64,
    pub trials: usize,
}

fn expand(sigma: &[i32], block: usize) -> Vec<f64> {
    sigma
        .iter()
        .flat_map(|s| std::iter::repeat_n(*s as f64, block))
        .collect()
}

/// Dense decision of inverse-positivity, optionally in a gauged order.
pub fn inverse_positivity(
    asys: &AssembledSystem,
    gauge: Option<&[i32]>,
    set: &Settings,
) -> Result<OracleReport> {
    let n = asys.dof();
    if n > set.oracle_max_dof {
        return Err(Error::TooLarge {
            n,
            limit: set.oracle_max_dof,
        });
    }
    if let Some(s) = gauge {
        if s.len() != asys.n_species {
            return Err(Error::DimMismatch {
                expected: asys.n_species,
                got: s.len(),
            });
        }
    }
    let (a, g) = match gauge {
        Some(s) => {
            let d = expand(s, asys.block_size());
            let nb = asys.g_mat.n_cols() / asys.n_species.max(1);
            let db = expand(s, nb);
            (asys.a.scale(&d, &d), asys.g_mat.scale(&d, &db))
        }
        None => (asys.a.clone(), asys.g_mat.clone()),
    };
    let inv = dense_inverse(&a, set.oracle_max_dof, set.exec)?;
    let scale = inv.max_abs();
    let (mut min_entry, mut witness) = (f64::INFINITY, None);
    for i in 0..n {
        for (j, v) in inv.row(i).iter().enumerate() {
            if *v < min_entry {
                min_entry = *v;
                witness = Some((i, j));
            }
        }
    }

    // -A⁻¹G, one boundary column at a time
    let gt = g.transpose();
    let cols = par::map_range(set.exec, gt.n_rows(), |c| {
        let (rows, vals) = gt.row(c);
        (0..n)
            .map(|i| {
                let r = inv.row(i);
                -rows.iter().zip(vals).map(|(k, v)| r[*k] * v).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    let bscale = cols.iter().map(|c| inf_norm(c)).fold(0.0, f64::max);
    let bmin = cols
        .iter()
        .flat_map(|c| c.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let (boundary_monotone, min_boundary_entry) = if cols.is_empty() || n == 0 {
        (None, None)
    } else {
        (Some(bmin >= -set.tol_op * bscale), Some(bmin))
    };

    Ok(OracleReport {
        inverse_positive: Some(min_entry >= -set.tol_op * scale),
        sampled: false,
        min_entry,
        witness,
        boundary_monotone,
        min_boundary_entry,
        gauge: gauge.map(<[i32]>::to_vec),
        dof: n,
        scale,
        trials: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsolutionCheck {
    pub is_subsolution: bool,
    pub max_residual: f64,
}

/// Componentwise test of `A u + G g ≤ f`.
pub fn verify_subsolution(
    asys: &AssembledSystem,
    u: &[f64],
    g: &[f64],
    set: &Settings,
) -> Result<SubsolutionCheck> {
    if g.len() != asys.g_mat.n_cols() {
        return Err(Error::DimMismatch {
            expected: asys.g_mat.n_cols(),
            got: g.len(),
        });
    }
    let au = asys.a.matvec(u)?;
    let gg = asys.g_mat.matvec(g)?;
    let max_residual = au
        .iter()
        .zip(&gg)
        .zip(&asys.f_vec)
        .map(|((x, y), f)| x + y - f)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SubsolutionCheck {
        is_subsolution: max_residual <= set.tol_res * (1.0 + inf_norm(&asys.f_vec)),
        max_residual,
    })
}

fn probe_rhs(n: usize, seed: u64, trial: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut f = vec![0.0; n];
    if rng.random_bool(0.5) {
        f[rng.random_range(0..n)] = 1.0;
    } else {
        for _ in 0..rng.random_range(1..=n.min(8)) {
            f[rng.random_range(0..n)] = rng.random_range(0.0..1.0);
        }
    }
    f
}

/// Falsification-only evidence: solves against random nonnegative sparse
/// right-hand sides and reports the most negative solution entry.
pub fn random_probe(
    asys: &AssembledSystem,
    trials: usize,
    seed: u64,
    set: &Settings,
) -> Result<OracleReport> {
    let n = asys.dof();
    let mut report = OracleReport {
        inverse_positive: None,
        sampled: true,
        min_entry: f64::INFINITY,
        witness: None,
        boundary_monotone: None,
        min_boundary_entry: None,
        gauge: None,
        dof: n,
        scale: 0.0,
        trials,
    };
    if trials == 0 || n == 0 {
        return Ok(report);
    }
    let lu = LuFactor::new(&asys.a)?;
    let sols = par::try_map_range(set.exec, trials, |t| lu.solve(&probe_rhs(n, seed, t)))?;
    for (t, u) in sols.iter().enumerate() {
        let scale = inf_norm(u);
        report.scale = report.scale.max(scale);
        for (i, v) in u.iter().enumerate() {
            if *v < report.min_entry {
                report.min_entry = *v;
                report.witness = Some((i, t));
            }
            if *v < -set.tol_op * scale {
                report.inverse_positive = Some(false);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_system, CouplingMode};
    use crate::expr::Expr;
    use crate::linalg::lu_solve;
    use crate::mesh::Grid;
    use crate::system::SystemSpec;
    use std::f64::consts::PI;

    fn scalar(lo: f64, hi: f64, n: usize, c: f64) -> AssembledSystem {
        let g = Grid::new_1d(lo, hi, n).unwrap();
        let sys = SystemSpec::laplacians(g, 1)
            .with_reaction(0, Expr::constant(c))
            .sample()
            .unwrap();
        assemble_system(&sys, &CouplingMode::Full, None).unwrap()
    }

    #[test]
    fn laplacian_green_function() {
        let asys = scalar(0.0, 1.0, 32, 0.0);
        let set = Settings::default();
        let rep = inverse_positivity(&asys, None, &set).unwrap();
        assert_eq!(rep.inverse_positive, Some(true));
        assert_eq!(rep.boundary_monotone, Some(true));
        assert!(rep.min_entry > 0.0);
        // discrete Green's function of the 3-point stencil: h * x_min * (1 - x_max)
        let inv = dense_inverse(&asys.a, 2500, set.exec).unwrap();
        let h = 1.0 / 32.0;
        for i in 0..31 {
            for j in 0..31 {
                let (xi, xj) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
                let g = h * xi.min(xj) * (1.0 - xi.max(xj));
                assert!((inv.get(i, j) - g).abs() <= 1e-10 * g, "{i} {j}");
            }
        }
    }

    #[test]
    fn negative_reaction_breaks_positivity() {
        let asys = scalar(0.0, PI, 32, -20.0);
        let rep = inverse_positivity(&asys, None, &Settings::default()).unwrap();
        assert_eq!(rep.inverse_positive, Some(false));
        assert!(rep.min_entry < 0.0 && rep.witness.is_some());
    }

    fn competitive(m: f64) -> AssembledSystem {
        let g = Grid::new_2d([0.0, 0.0], [PI, PI], [8, 8]).unwrap();
        let sys = SystemSpec::laplacians(g, 2)
            .with_coupling(vec![vec![0.0, m], vec![m, 0.0]])
            .sample()
            .unwrap();
        assemble_system(&sys, &CouplingMode::Full, None).unwrap()
    }

    #[test]
    fn gauged_competitive_system() {
        let asys = competitive(0.5);
        let set = Settings::default();
        let rep = inverse_positivity(&asys, Some(&[1, -1]), &set).unwrap();
        assert_eq!(rep.inverse_positive, Some(true));
        assert_eq!(rep.boundary_monotone, Some(true));
        let plain = inverse_positivity(&asys, None, &set).unwrap();
        assert_eq!(plain.inverse_positive, Some(false));
    }

    #[test]
    fn gauge_conjugation() {
        let asys = competitive(0.7);
        let set = Settings::default();
        let n = asys.dof();
        let d = expand(&[1, -1], asys.block_size());
        let inv = dense_inverse(&asys.a, 2500, set.exec).unwrap();
        let ginv = dense_inverse(&asys.a.scale(&d, &d), 2500, set.exec).unwrap();
        let scale = inv.max_abs();
        for i in 0..n {
            for j in 0..n {
                let want = d[i] * inv.get(i, j) * d[j];
                assert!((ginv.get(i, j) - want).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn too_large() {
        let asys = scalar(0.0, 1.0, 32, 0.0);
        let set = Settings {
            oracle_max_dof: 10,
            ..Settings::default()
        };
        assert!(matches!(
            inverse_positivity(&asys, None, &set),
            Err(Error::TooLarge { n: 31, limit: 10 })
        ));
    }

    #[test]
    fn subsolutions() {
        let g = Grid::new_1d(0.0, PI, 16).unwrap();
        let mut spec = SystemSpec::laplacians(g, 1);
        spec.f = vec![crate::expr::parse_expr("1 + x").unwrap()];
        spec.g = vec![Expr::constant(0.0)];
        let asys = assemble_system(&spec.sample().unwrap(), &CouplingMode::Full, None).unwrap();
        let set = Settings::default();
        let zero_g = vec![0.0; asys.g_mat.n_cols()];
        let n = asys.dof();
        assert!(verify_subsolution(&asys, &vec![0.0; n], &zero_g, &set).unwrap().is_subsolution);
        let u = lu_solve(&asys.a, &asys.f_vec).unwrap();
        let chk = verify_subsolution(&asys, &u, &zero_g, &set).unwrap();
        assert!(chk.is_subsolution && chk.max_residual.abs() < 1e-9);
        let mut bumped = u.clone();
        bumped[7] += 0.1;
        assert!(!verify_subsolution(&asys, &bumped, &zero_g, &set).unwrap().is_subsolution);
        assert!(verify_subsolution(&asys, &u, &[0.0], &set).is_err());
    }

    #[test]
    fn probes() {
        let set = Settings::default();
        let m = scalar(0.0, 1.0, 20, 0.0);
        let rep = random_probe(&m, 50, 7, &set).unwrap();
        assert_eq!(rep.inverse_positive, None);
        assert!(rep.sampled && rep.min_entry >= 0.0);
        assert_eq!(random_probe(&m, 0, 7, &set).unwrap().trials, 0);

        let bad = scalar(0.0, PI, 32, -20.0);
        let rep = random_probe(&bad, 50, 7, &set).unwrap();
        assert_eq!(rep.inverse_positive, Some(false));
        let seq = random_probe(
            &bad,
            50,
            7,
            &Settings {
                exec: crate::par::Exec::Sequential,
                ..set
            },
        )
        .unwrap();
        assert_eq!(rep, seq);
    }
}
