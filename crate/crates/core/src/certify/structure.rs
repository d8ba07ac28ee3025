use serde::Serialize;

use crate::graph::{is_strongly_connected, strongly_connected_components, topological_order};
use crate::system::DiscreteSystem;

/// `M⁺` and `M⁻` sampled at interior nodes: `plus[k][l][i]` is `max(m_kl, 0)`
/// at the `i`-th interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingParts {
    pub plus: Vec<Vec<Vec<f64>>>,
    pub minus: Vec<Vec<Vec<f64>>>,
    /// Grid node of each interior index.
    pub nodes: Vec<usize>,
}

impl CouplingParts {
    pub fn new(sys: &DiscreteSystem) -> CouplingParts {
        let n = sys.n_species();
        let nodes: Vec<usize> = sys.grid.interior_nodes().collect();
        let pick = |f: fn(f64) -> f64| -> Vec<Vec<Vec<f64>>> {
            (0..n)
                .map(|k| {
                    (0..n)
                        .map(|l| sys.coupling_interior(k, l).map(f).collect())
                        .collect()
                })
                .collect()
        };
        CouplingParts {
            plus: pick(|v| v.max(0.0)),
            minus: pick(|v| v.min(0.0)),
            nodes,
        }
    }

    pub fn n_species(&self) -> usize {
        self.plus.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn plus_present(&self, k: usize, l: usize, tol: f64) -> bool {
        self.plus[k][l].iter().any(|v| v.abs() > tol)
    }

    pub fn minus_present(&self, k: usize, l: usize, tol: f64) -> bool {
        self.minus[k][l].iter().any(|v| v.abs() > tol)
    }

    pub fn offdiag_plus_present(&self, tol: f64) -> bool {
        let n = self.n_species();
        (0..n).any(|k| (0..n).any(|l| k != l && self.plus_present(k, l, tol)))
    }

    /// Species digraph of the cooperative part: edge `l -> k` iff `m_kl⁻ ≢ 0`.
    pub fn minus_digraph(&self, tol: f64) -> Vec<Vec<usize>> {
        let n = self.n_species();
        (0..n)
            .map(|l| {
                (0..n)
                    .filter(|&k| k != l && self.minus_present(k, l, tol))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "class", content = "detail")]
pub enum StructureClass {
    Cooperative,
    IrreducibleCooperativePart,
    DiagonalMinus,
    /// Species blocks (0-based), ordered by smallest member.
    BlockDiagonalMinus(Vec<Vec<usize>>),
    /// Species order (0-based) making `M⁻` lower triangular.
    TriangularMinus(Vec<usize>),
    General,
}

impl StructureClass {
    pub fn name(&self) -> &'static str {
        match self {
            StructureClass::Cooperative => "Cooperative",
            StructureClass::IrreducibleCooperativePart => "IrreducibleCooperativePart",
            StructureClass::DiagonalMinus => "DiagonalMinus",
            StructureClass::BlockDiagonalMinus(_) => "BlockDiagonalMinus",
            StructureClass::TriangularMinus(_) => "TriangularMinus",
            StructureClass::General => "General",
        }
    }
}

/// Shape of the cooperative part alone, ignoring `M⁺`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum MinusShape {
    Irreducible,
    Diagonal,
    Triangular(Vec<usize>),
    Blocks(Vec<Vec<usize>>),
    General,
}

pub(crate) fn minus_shape(adj: &[Vec<usize>]) -> MinusShape {
    let n = adj.len();
    if n > 1 && is_strongly_connected(adj) {
        return MinusShape::Irreducible;
    }
    if adj.iter().all(Vec::is_empty) {
        return MinusShape::Diagonal;
    }
    if let Some(order) = topological_order(adj) {
        return MinusShape::Triangular(order);
    }
    let comps = strongly_connected_components(adj);
    let mut owner = vec![0; n];
    for (c, members) in comps.iter().enumerate() {
        for &m in members {
            owner[m] = c;
        }
    }
    let crossing = adj
        .iter()
        .enumerate()
        .any(|(l, out)| out.iter().any(|&k| owner[k] != owner[l]));
    if crossing {
        MinusShape::General
    } else {
        MinusShape::Blocks(comps)
    }
}

/// Classifies the sampled sign pattern of the coupling.
pub fn classify_structure(sys: &DiscreteSystem, support_tol: f64) -> StructureClass {
    let parts = CouplingParts::new(sys);
    classify_parts(&parts, support_tol)
}

pub(crate) fn classify_parts(parts: &CouplingParts, tol: f64) -> StructureClass {
    if !parts.offdiag_plus_present(tol) {
        return StructureClass::Cooperative;
    }
    match minus_shape(&parts.minus_digraph(tol)) {
        MinusShape::Irreducible => StructureClass::IrreducibleCooperativePart,
        MinusShape::Diagonal => StructureClass::DiagonalMinus,
        MinusShape::Triangular(order) => StructureClass::TriangularMinus(order),
        MinusShape::Blocks(b) => StructureClass::BlockDiagonalMinus(b),
        MinusShape::General => StructureClass::General,
    }
}
