//! Verdicts on the comparison principle.
//!
//! The coupling is split as `M = M⁺ + M⁻`. Spectral data of the cooperative
//! operator `L + M⁻` (or of its diagonal entries) is combined with pointwise
//! bounds on `M⁺` into sufficient conditions; failure conditions produce a
//! nonnegative field `w` with `A w ≤ 0` that is checked numerically before a
//! verdict is issued.

mod conditions;
mod failure;
mod gauge;
mod structure;

pub use conditions::{
    check_thm1, check_thm3, check_thm4, check_thm5, condition_margins, sharp_margin, Margins,
};
pub use failure::{
    build_counterexample, check_failure, Counterexample, FailureCandidate, FailureCheck,
    FailureRoute,
};
pub use gauge::{find_gauge, gauged_system, GaugeResult};
pub use structure::{classify_structure, CouplingParts, StructureClass};

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_system, CouplingMode};
use crate::error::{Error, Result};
use crate::oracle::{inverse_positivity, OracleReport};
use crate::settings::Settings;
use crate::spectral::EigenSummary;
use crate::system::DiscreteSystem;
use structure::{classify_parts, minus_shape, MinusShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Basic,
    /// Also accept the pointwise weighted condition built from the adjoint
    /// eigenfunctions.
    Sharp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum VerdictKind {
    HoldsThm1,
    HoldsThm3,
    HoldsThm4,
    HoldsThm5 { epsilon: f64 },
    /// Cooperative system with negative principal eigenvalue.
    FailsThm1,
    /// `species` is 0-based.
    FailsThm6 { species: usize },
    FailsThm7 { species: usize },
    Inconclusive,
}

impl VerdictKind {
    pub fn name(&self) -> &'static str {
        match self {
            VerdictKind::HoldsThm1 => "HoldsThm1",
            VerdictKind::HoldsThm3 => "HoldsThm3",
            VerdictKind::HoldsThm4 => "HoldsThm4",
            VerdictKind::HoldsThm5 { .. } => "HoldsThm5",
            VerdictKind::FailsThm1 => "FailsThm1",
            VerdictKind::FailsThm6 { .. } => "FailsThm6",
            VerdictKind::FailsThm7 { .. } => "FailsThm7",
            VerdictKind::Inconclusive => "Inconclusive",
        }
    }

    pub fn holds(&self) -> bool {
        matches!(
            self,
            VerdictKind::HoldsThm1
                | VerdictKind::HoldsThm3
                | VerdictKind::HoldsThm4
                | VerdictKind::HoldsThm5 { .. }
        )
    }

    pub fn fails(&self) -> bool {
        matches!(
            self,
            VerdictKind::FailsThm1 | VerdictKind::FailsThm6 { .. } | VerdictKind::FailsThm7 { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    /// Eigenvalue used for each species.
    pub lambdas: Vec<f64>,
    pub eigen: Vec<EigenSummary>,
    pub margins: Option<Margins>,
    /// Absolute tolerance the margins were compared against.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Theorem whose conditions were evaluated, if any.
    pub theorem: Option<u8>,
    /// "spectral criterion", "sufficient condition", "verified counterexample" or "none".
    pub label: String,
    pub mode: Mode,
    pub structure: StructureClass,
    pub evidence: Evidence,
    pub counterexample: Option<Counterexample>,
    /// Positive fields built by the triangular construction, original species order.
    #[serde(skip)]
    pub constructed: Vec<Vec<f64>>,
    pub candidates: Vec<FailureCandidate>,
    pub gauge: Option<GaugeResult>,
    pub oracle: Option<OracleReport>,
    pub oracle_gauged: Option<OracleReport>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub(crate) fn new(kind: VerdictKind, theorem: Option<u8>, structure: StructureClass, mode: Mode) -> Verdict {
        let label = if kind.fails() {
            "verified counterexample"
        } else {
            match (&kind, theorem) {
                (VerdictKind::HoldsThm1, _) => "spectral criterion",
                (VerdictKind::Inconclusive, None) => "none",
                _ => "sufficient condition",
            }
        };
        Verdict {
            kind,
            theorem,
            label: label.to_string(),
            mode,
            structure,
            evidence: Evidence {
                lambdas: Vec::new(),
                eigen: Vec::new(),
                margins: None,
                tolerance: 0.0,
            },
            counterexample: None,
            constructed: Vec::new(),
            candidates: Vec::new(),
            gauge: None,
            oracle: None,
            oracle_gauged: None,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub mode: Mode,
    /// Attach dense oracle reports when the system fits the budget.
    pub oracle: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            mode: Mode::Basic,
            oracle: true,
        }
    }
}

/// Full pipeline: gates, classification, failure search, sufficient
/// conditions, then gauge and oracle metadata.
pub fn certify(sys: &DiscreteSystem, opts: &CertifyOptions, set: &Settings) -> Result<Verdict> {
    let coop = assemble_system(sys, &CouplingMode::CooperativeOnly, None)?;
    if !coop.z_matrix {
        let w = crate::assembly::check_z_matrix(&coop.a, coop.n_species, coop.block_size())
            .worst
            .expect("non-Z matrix has an off-diagonal entry");
        return Err(Error::NotZMatrix {
            row: w.row,
            col: w.col,
            value: w.value,
        });
    }
    let parts = CouplingParts::new(sys);
    let structure = classify_parts(&parts, set.support_tol);

    let failure = check_failure(sys, set)?;
    let mut verdict = match failure.verdict {
        Some(v) => v,
        None => {
            let mut v = route(sys, &structure, &parts, opts.mode, set)?;
            v.candidates = failure.candidates;
            v
        }
    };

    let gauge = find_gauge(sys, set.support_tol);
    if opts.oracle {
        let full = assemble_system(sys, &CouplingMode::Full, None)?;
        if full.dof() <= set.oracle_max_dof {
            verdict.oracle = Some(inverse_positivity(&full, None, set)?);
            if let Some(sigma) = gauge.sigma.as_deref().filter(|s| s.iter().any(|v| *v < 0)) {
                verdict.oracle_gauged = Some(inverse_positivity(&full, Some(sigma), set)?);
            }
        } else {
            verdict
                .notes
                .push(format!("oracle skipped: {} unknowns above budget {}", full.dof(), set.oracle_max_dof));
        }
    }
    verdict.gauge = Some(gauge);
    Ok(verdict)
}

fn route(
    sys: &DiscreteSystem,
    structure: &StructureClass,
    parts: &CouplingParts,
    mode: Mode,
    set: &Settings,
) -> Result<Verdict> {
    let by_minus = |shape: MinusShape| -> Result<Verdict> {
        match shape {
            MinusShape::Irreducible => check_thm3(sys, mode, set),
            MinusShape::Diagonal | MinusShape::Blocks(_) => check_thm4(sys, mode, set),
            MinusShape::Triangular(_) => match check_thm5(sys, mode, set) {
                Err(Error::InfeasibleEpsilon(msg)) => {
                    let mut v = Verdict::new(VerdictKind::Inconclusive, Some(5), structure.clone(), mode);
                    v.notes.push(format!("no feasible epsilon: {msg}"));
                    Ok(v)
                }
                other => other,
            },
            MinusShape::General => {
                let mut v = Verdict::new(VerdictKind::Inconclusive, None, structure.clone(), mode);
                v.notes
                    .push("cooperative part is neither irreducible, block diagonal nor triangular".into());
                Ok(v)
            }
        }
    };
    let shape = minus_shape(&parts.minus_digraph(set.support_tol));
    match structure {
        StructureClass::Cooperative => {
            if sys.n_species() == 1 || shape == MinusShape::Irreducible {
                check_thm1(sys, set)
            } else {
                by_minus(shape)
            }
        }
        _ => by_minus(shape),
    }
}
