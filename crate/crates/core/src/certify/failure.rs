use serde::Serialize;

use super::conditions::condition_margins;
use super::structure::{classify_parts, minus_shape, CouplingParts, MinusShape};
use super::{Mode, Verdict, VerdictKind};
use crate::assembly::{assemble_system, CouplingMode};
use crate::error::{Error, Result};
use crate::linalg::SparseMat;
use crate::par;
use crate::settings::Settings;
use crate::spectral::{component_eigen, cooperative_eigen, EigenPair};
use crate::system::DiscreteSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FailureRoute {
    /// One species carries its own eigenfunction, the others are zero.
    Thm6,
    /// The eigenfunction of the whole cooperative part.
    Thm7,
    /// Eigenfunction of a cooperative system with negative eigenvalue.
    Eigenfunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    /// 0-based species index the construction is built around.
    pub species: usize,
    pub route: FailureRoute,
    /// Block field over all species, interior nodes.
    #[serde(skip)]
    pub w: Vec<f64>,
    pub verified: bool,
    /// `max_i (A w)_i`.
    pub residual_max: f64,
    pub norm_a: f64,
    pub nonnegative: bool,
    pub max_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureCandidate {
    pub species: usize,
    pub route: FailureRoute,
    pub lambda: f64,
    pub reason: String,
    pub verified: bool,
    pub residual_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureCheck {
    pub verdict: Option<Verdict>,
    pub candidates: Vec<FailureCandidate>,
}

/// `w ≥ 0`, `max w = 1` and `A w ≤ tol_res ‖A‖∞` componentwise.
pub(crate) fn verify_field(
    a: &SparseMat,
    w: Vec<f64>,
    species: usize,
    route: FailureRoute,
    set: &Settings,
) -> Counterexample {
    let norm_a = a.norm_inf();
    let aw = a.matvec(&w).expect("field matches the system size");
    let residual_max = aw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let nonnegative = w.iter().all(|v| *v >= 0.0);
    let max_value = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Counterexample {
        species,
        route,
        verified: nonnegative && max_value == 1.0 && residual_max <= set.tol_res * norm_a,
        w,
        residual_max,
        norm_a,
        nonnegative,
        max_value,
    }
}

fn embed(sys: &DiscreteSystem, j: usize, ep: &EigenPair) -> Vec<f64> {
    let b = ep.right.len();
    let mut w = vec![0.0; b * sys.n_species()];
    w[j * b..(j + 1) * b].copy_from_slice(&ep.right);
    w
}

/// Builds the candidate field for species `j` and checks it against the
/// full operator. The field is returned whether or not it verifies.
pub fn build_counterexample(
    sys: &DiscreteSystem,
    j: usize,
    route: FailureRoute,
    set: &Settings,
) -> Result<Counterexample> {
    let w = match route {
        FailureRoute::Thm6 => embed(sys, j, &component_eigen(sys, j, set)?),
        FailureRoute::Thm7 => cooperative_eigen(sys, set)?.right,
        FailureRoute::Eigenfunction => {
            crate::spectral::system_eigen(sys, &CouplingMode::Full, None, set)?.right
        }
    };
    let a = assemble_system(sys, &CouplingMode::Full, None)?.a;
    Ok(verify_field(&a, w, j, route, set))
}

fn max_pointwise(lambda: f64, plus_jj: &[f64]) -> f64 {
    plus_jj
        .iter()
        .map(|p| lambda + p)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Searches for a species whose own eigenvalue stays negative everywhere
/// after adding `m_jj⁺`. A verdict is produced only for verified fields.
pub fn check_failure(sys: &DiscreteSystem, set: &Settings) -> Result<FailureCheck> {
    let n = sys.n_species();
    let parts = CouplingParts::new(sys);
    let tol_s = set.support_tol;
    let structure = classify_parts(&parts, tol_s);
    let irreducible = n > 1 && minus_shape(&parts.minus_digraph(tol_s)) == MinusShape::Irreducible;
    let inner = Settings {
        exec: par::Exec::Sequential,
        ..*set
    };

    let (route, eig): (FailureRoute, Vec<EigenPair>) = if irreducible {
        match cooperative_eigen(sys, set) {
            Ok(ep) => (FailureRoute::Thm7, vec![ep; 1]),
            Err(Error::NoConvergence { .. }) => return Ok(FailureCheck { verdict: None, candidates: vec![] }),
            Err(e) => return Err(e),
        }
    } else {
        (
            FailureRoute::Thm6,
            par::try_map_range(set.exec, n, |j| component_eigen(sys, j, &inner))?,
        )
    };
    let lam = |j: usize| if irreducible { eig[0].lambda } else { eig[j].lambda };
    let lams: Vec<f64> = (0..n).map(lam).collect();
    let tol = set.cond_tol(lams.iter().fold(0.0, |m, l| m.max(l.abs())));
    let full = assemble_system(sys, &CouplingMode::Full, None)?.a;

    let mut candidates = Vec::new();
    for j in 0..n {
        if max_pointwise(lams[j], &parts.plus[j][j]) >= -tol {
            continue;
        }
        let gate = match route {
            // both the row and the column of M⁺ must vanish off the diagonal
            FailureRoute::Thm6 => (0..n)
                .filter(|&l| l != j)
                .find(|&l| parts.plus_present(j, l, tol_s) || parts.plus_present(l, j, tol_s))
                .map(|l| format!("m⁺ couples species {} and {}", j + 1, l + 1)),
            _ => (0..n)
                .flat_map(|k| (0..n).map(move |l| (k, l)))
                .find(|&(k, l)| (k, l) != (j, j) && parts.plus_present(k, l, tol_s))
                .map(|(k, l)| format!("m⁺ is nonzero at entry ({}, {})", k + 1, l + 1)),
        };
        let w = match route {
            FailureRoute::Thm6 => embed(sys, j, &eig[j]),
            _ => eig[0].right.clone(),
        };
        let cx = verify_field(&full, w, j, route, set);
        match gate {
            None if cx.verified => {
                let kind = match route {
                    FailureRoute::Thm6 => VerdictKind::FailsThm6 { species: j },
                    _ => VerdictKind::FailsThm7 { species: j },
                };
                let theorem = if route == FailureRoute::Thm6 { 6 } else { 7 };
                let mut v = Verdict::new(kind, Some(theorem), structure, Mode::Basic);
                let mut m = condition_margins(&lams, &parts);
                m.x0_coords = m.x0.map(|p| sys.grid.coords(p)[..sys.grid.dim()].to_vec());
                v.evidence.lambdas = lams.clone();
                v.evidence.eigen = eig.iter().map(EigenPair::summary).collect();
                v.evidence.tolerance = tol;
                v.evidence.margins = Some(m);
                v.counterexample = Some(cx);
                v.candidates = candidates;
                return Ok(FailureCheck {
                    verdict: Some(v),
                    candidates: Vec::new(),
                });
            }
            _ => candidates.push(FailureCandidate {
                species: j,
                route,
                lambda: lams[j],
                reason: gate.unwrap_or_else(|| "constructed field failed verification".into()),
                verified: cx.verified,
                residual_max: cx.residual_max,
            }),
        }
    }
    Ok(FailureCheck {
        verdict: None,
        candidates,
    })
}
