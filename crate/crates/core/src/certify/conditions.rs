use serde::Serialize;

use super::failure::verify_field;
use super::structure::{classify_parts, minus_shape, CouplingParts, MinusShape};
use super::{Mode, Verdict, VerdictKind};
use crate::assembly::{assemble_system, CouplingMode};
use crate::error::{Error, Result};
use crate::linalg::LuFactor;
use crate::par;
use crate::settings::Settings;
use crate::spectral::{component_eigen, cooperative_eigen, system_eigen, EigenPair};
use crate::system::DiscreteSystem;

/// Condition values for per-species eigenvalues `λ_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margins {
    /// `min_{x,j} (λ_j + m_jj⁺(x))`; must be `≥ 0`.
    pub diagonal: f64,
    pub diagonal_by_species: Vec<f64>,
    /// `max_x min_j (λ_j + Σ_k m_kj⁺(x))`; must be `> 0`.
    pub column_sum: f64,
    /// `λ_j + Σ_k m_kj⁺(x₀)` at the maximizing node.
    pub column_sum_by_species: Vec<f64>,
    /// Grid node of the maximizer `x₀`.
    pub x0: Option<usize>,
    pub x0_coords: Option<Vec<f64>>,
    /// `min_{x,j} Σ_k (δ_jk λ_k + m_kj⁺) w_k / Σ_k w_k` in sharp mode.
    pub sharp: Option<f64>,
}

fn column_sums(lams: &[f64], parts: &CouplingParts, x: usize) -> Vec<f64> {
    let n = lams.len();
    (0..n)
        .map(|j| lams[j] + (0..n).map(|k| parts.plus[k][j][x]).sum::<f64>())
        .collect()
}

/// Pointwise condition values. Ties in `x₀` go to the first node.
pub fn condition_margins(lams: &[f64], parts: &CouplingParts) -> Margins {
    let n = lams.len();
    let diagonal_by_species: Vec<f64> = (0..n)
        .map(|j| {
            parts.plus[j][j]
                .iter()
                .map(|p| lams[j] + p)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for x in 0..parts.n_nodes() {
        let m = column_sums(lams, parts, x).into_iter().fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((x, m));
        }
    }
    Margins {
        diagonal: diagonal_by_species.iter().copied().fold(f64::INFINITY, f64::min),
        diagonal_by_species,
        column_sum: best.map_or(f64::NEG_INFINITY, |b| b.1),
        column_sum_by_species: best.map_or(Vec::new(), |(x, _)| column_sums(lams, parts, x)),
        x0: best.map(|(x, _)| parts.nodes[x]),
        x0_coords: None,
        sharp: None,
    }
}

/// Weighted pointwise condition with positive fields `w[k]` (interior nodes).
pub fn sharp_margin(lams: &[f64], parts: &CouplingParts, w: &[Vec<f64>]) -> f64 {
    let n = lams.len();
    let mut worst = f64::INFINITY;
    for x in 0..parts.n_nodes() {
        let total: f64 = (0..n).map(|k| w[k][x]).sum();
        for j in 0..n {
            let s: f64 = (0..n)
                .map(|k| {
                    let d = if j == k { lams[k] } else { 0.0 };
                    (d + parts.plus[k][j][x]) * w[k][x]
                })
                .sum();
            worst = worst.min(s / total);
        }
    }
    worst
}

fn split_blocks(v: &[f64], n: usize) -> Vec<Vec<f64>> {
    let b = v.len() / n;
    v.chunks(b).map(<[f64]>::to_vec).collect()
}

fn with_coords(mut m: Margins, sys: &DiscreteSystem) -> Margins {
    m.x0_coords = m
        .x0
        .map(|p| sys.grid.coords(p)[..sys.grid.dim()].to_vec());
    m
}

fn max_abs(lams: &[f64]) -> f64 {
    lams.iter().fold(0.0, |m, l| m.max(l.abs()))
}

/// Cooperative systems: the sign of the principal eigenvalue of `L + M`.
pub fn check_thm1(sys: &DiscreteSystem, set: &Settings) -> Result<Verdict> {
    let parts = CouplingParts::new(sys);
    if parts.offdiag_plus_present(set.support_tol) {
        return Err(Error::StructureUnsupported(
            "positive off-diagonal coupling present; the system is not cooperative".into(),
        ));
    }
    let ep = system_eigen(sys, &CouplingMode::Full, None, set)?;
    let tol = set.cond_tol(ep.lambda);
    let structure = classify_parts(&parts, set.support_tol);
    let kind = if ep.lambda > tol {
        VerdictKind::HoldsThm1
    } else if ep.lambda < -tol {
        VerdictKind::FailsThm1
    } else {
        VerdictKind::Inconclusive
    };
    let mut v = Verdict::new(kind, Some(1), structure, Mode::Basic);
    if v.kind.fails() {
        let a = assemble_system(sys, &CouplingMode::Full, None)?.a;
        let cx = verify_field(&a, ep.right.clone(), 0, super::FailureRoute::Eigenfunction, set);
        if !cx.verified {
            v = Verdict::new(VerdictKind::Inconclusive, Some(1), v.structure, Mode::Basic);
            v.notes.push("eigenfunction counterexample failed verification".into());
        }
        v.counterexample = Some(cx);
    } else if v.kind == VerdictKind::Inconclusive {
        v.notes.push(format!("principal eigenvalue {:e} is within tolerance of zero", ep.lambda));
    }
    v.evidence.lambdas = vec![ep.lambda; sys.n_species()];
    v.evidence.eigen = vec![ep.summary()];
    v.evidence.tolerance = tol;
    Ok(v)
}

fn decide(
    v: &mut Verdict,
    holds: VerdictKind,
    lams: &[f64],
    parts: &CouplingParts,
    sharp_w: Option<Vec<Vec<f64>>>,
    sys: &DiscreteSystem,
    set: &Settings,
) {
    let tol = set.cond_tol(max_abs(lams));
    let mut m = with_coords(condition_margins(lams, parts), sys);
    let basic = m.diagonal >= -tol && m.column_sum > tol;
    let sharp = sharp_w.map(|w| sharp_margin(lams, parts, &w));
    m.sharp = sharp;
    let sharp_ok = sharp.is_some_and(|s| s > tol);
    if basic || sharp_ok {
        v.kind = holds;
        if !basic {
            v.notes.push("decided by the weighted pointwise condition".into());
        }
    } else {
        if m.diagonal < -tol {
            v.notes.push(format!("diagonal condition fails: margin {:e}", m.diagonal));
        }
        if m.column_sum <= tol {
            v.notes.push(format!("no node with all column sums positive: best {:e}", m.column_sum));
        }
    }
    v.evidence.lambdas = lams.to_vec();
    v.evidence.tolerance = tol;
    v.evidence.margins = Some(m);
}

/// Irreducible cooperative part: one eigenvalue for the whole system.
pub fn check_thm3(sys: &DiscreteSystem, mode: Mode, set: &Settings) -> Result<Verdict> {
    let parts = CouplingParts::new(sys);
    let n = sys.n_species();
    if n > 1 && minus_shape(&parts.minus_digraph(set.support_tol)) != MinusShape::Irreducible {
        return Err(Error::StructureUnsupported("cooperative part is reducible".into()));
    }
    let ep = cooperative_eigen(sys, set)?;
    let mut v = Verdict::new(VerdictKind::Inconclusive, Some(3), classify_parts(&parts, set.support_tol), mode);
    let w = (mode == Mode::Sharp).then(|| split_blocks(&ep.left, n));
    decide(&mut v, VerdictKind::HoldsThm3, &vec![ep.lambda; n], &parts, w, sys, set);
    v.evidence.eigen = vec![ep.summary()];
    Ok(v)
}

fn block_eigen(sys: &DiscreteSystem, block: &[usize], set: &Settings) -> Result<EigenPair> {
    let inner = Settings {
        exec: par::Exec::Sequential,
        ..*set
    };
    if block.len() == 1 {
        component_eigen(sys, block[0], &inner)
    } else {
        cooperative_eigen(&sys.restricted(block), &inner)
    }
}

/// Diagonal or block-diagonal cooperative part: one eigenvalue per block.
pub fn check_thm4(sys: &DiscreteSystem, mode: Mode, set: &Settings) -> Result<Verdict> {
    let parts = CouplingParts::new(sys);
    let n = sys.n_species();
    let blocks: Vec<Vec<usize>> = match minus_shape(&parts.minus_digraph(set.support_tol)) {
        MinusShape::Diagonal => (0..n).map(|j| vec![j]).collect(),
        MinusShape::Blocks(b) => b,
        _ if n == 1 => vec![vec![0]],
        _ => {
            return Err(Error::StructureUnsupported(
                "cooperative part is neither diagonal nor block diagonal".into(),
            ))
        }
    };
    let eig = par::try_map_range(set.exec, blocks.len(), |b| block_eigen(sys, &blocks[b], set))?;
    let mut lams = vec![0.0; n];
    let mut w = vec![Vec::new(); n];
    for (block, ep) in blocks.iter().zip(&eig) {
        let parts_w = split_blocks(&ep.left, block.len());
        for (pos, &j) in block.iter().enumerate() {
            lams[j] = ep.lambda;
            w[j] = parts_w[pos].clone();
        }
    }
    let mut v = Verdict::new(VerdictKind::Inconclusive, Some(4), classify_parts(&parts, set.support_tol), mode);
    decide(&mut v, VerdictKind::HoldsThm4, &lams, &parts, (mode == Mode::Sharp).then_some(w), sys, set);
    v.evidence.eigen = eig.iter().map(EigenPair::summary).collect();
    Ok(v)
}

/// Triangular cooperative part: strict slack for every species after the
/// first, an inductively constructed positive field per species.
pub fn check_thm5(sys: &DiscreteSystem, mode: Mode, set: &Settings) -> Result<Verdict> {
    let n = sys.n_species();
    let parts0 = CouplingParts::new(sys);
    let order = match minus_shape(&parts0.minus_digraph(set.support_tol)) {
        MinusShape::Triangular(o) => o,
        MinusShape::Diagonal => (0..n).collect(),
        _ => {
            return Err(Error::StructureUnsupported(
                "cooperative part is not triangular".into(),
            ))
        }
    };
    if n < 2 {
        return Err(Error::StructureUnsupported(
            "the triangular construction needs at least two species".into(),
        ));
    }
    let p = sys.permuted(&order);
    let parts = CouplingParts::new(&p);
    let inner = Settings {
        exec: par::Exec::Sequential,
        ..*set
    };
    let eig = par::try_map_range(set.exec, n, |j| component_eigen(&p, j, &inner))?;
    let lams: Vec<f64> = eig.iter().map(|e| e.lambda).collect();
    let tol = set.cond_tol(max_abs(&lams));

    let diag = condition_margins(&lams, &parts).diagonal_by_species;
    if diag[0] < -tol {
        return Err(Error::InfeasibleEpsilon(format!(
            "first species: min(λ + m⁺) = {:e} < 0",
            diag[0]
        )));
    }
    if let Some(j) = (1..n).find(|&j| diag[j] <= tol) {
        return Err(Error::InfeasibleEpsilon(format!(
            "species {}: min(λ + m⁺) = {:e} leaves no room for ε",
            order[j] + 1,
            diag[j]
        )));
    }
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for x in 0..parts.n_nodes() {
        let c = column_sums(&lams, &parts, x);
        if c[0] < -tol {
            continue;
        }
        let m = c[1..].iter().copied().fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| m > b.1) {
            best = Some((x, m, c));
        }
    }
    let Some((x0, slack, _)) = best.filter(|b| b.1 > tol) else {
        return Err(Error::InfeasibleEpsilon(
            "no node where every column sum after the first is positive".into(),
        ));
    };
    let epsilon = 0.5 * diag[1..].iter().copied().fold(slack, f64::min);

    // w̃_1 is the eigenfunction; later fields solve shifted problems driven by |m_ji⁻| w̃_i
    let mut tilde: Vec<Vec<f64>> = vec![eig[0].right.clone()];
    for j in 1..n {
        let rhs: Vec<f64> = (0..parts.n_nodes())
            .map(|x| (0..j).map(|i| parts.minus[j][i][x].abs() * tilde[i][x]).sum())
            .collect();
        if rhs.iter().all(|r| *r == 0.0) {
            tilde.push(eig[j].right.clone());
            continue;
        }
        let a = assemble_system(&p.restricted(&[j]), &CouplingMode::CooperativeOnly, None)?.a;
        let w = LuFactor::new(&a.add_identity(-(lams[j] - epsilon)))?.solve(&rhs)?;
        let top = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        tilde.push(w.iter().map(|v| v / top).collect());
    }
    let positive = tilde.iter().all(|w| w.iter().all(|v| *v > 0.0));

    let eff: Vec<f64> = (0..n)
        .map(|j| if j == 0 { lams[0] } else { lams[j] - epsilon })
        .collect();
    let mut m = condition_margins(&eff, &parts);
    m.x0 = Some(parts.nodes[x0]);
    m.column_sum_by_species = column_sums(&eff, &parts, x0);
    m.column_sum = m.column_sum_by_species.iter().copied().fold(f64::INFINITY, f64::min);
    if mode == Mode::Sharp {
        m.sharp = Some(sharp_margin(&eff, &parts, &tilde));
    }

    // back to the original species order
    let mut inv = vec![0; n];
    for (pos, &s) in order.iter().enumerate() {
        inv[s] = pos;
    }
    let unperm = |v: &[f64]| -> Vec<f64> { (0..n).map(|s| v[inv[s]]).collect() };
    m.diagonal_by_species = unperm(&m.diagonal_by_species);
    m.column_sum_by_species = unperm(&m.column_sum_by_species);

    let kind = if positive {
        VerdictKind::HoldsThm5 { epsilon }
    } else {
        VerdictKind::Inconclusive
    };
    let mut v = Verdict::new(kind, Some(5), classify_parts(&parts0, set.support_tol), mode);
    if !positive {
        v.notes.push("constructed field lost positivity".into());
    }
    v.evidence.lambdas = unperm(&lams);
    v.evidence.eigen = (0..n).map(|s| eig[inv[s]].summary()).collect();
    v.evidence.tolerance = tol;
    v.evidence.margins = Some(with_coords(m, sys));
    v.constructed = (0..n).map(|s| tilde[inv[s]].clone()).collect();
    Ok(v)
}
