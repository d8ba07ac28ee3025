use serde::{Deserialize, Serialize};

use crate::par::Exec;

/// Numerical tolerances and budgets shared by the spectral, certify and
/// oracle layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Relative Collatz-Wielandt width at which power iteration stops.
    pub tol_eig: f64,
    pub max_iter: usize,
    /// Condition margins are compared against `tol_cond * (1 + |lambda|)`.
    pub tol_cond: f64,
    /// Inverse entries below `-tol_op * max|A^-1|` count as negative.
    pub tol_op: f64,
    pub oracle_max_dof: usize,
    /// Residual tolerance for counterexamples and sub-solutions.
    pub tol_res: f64,
    /// Coupling entries with magnitude above this at some node count as present.
    pub support_tol: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tol_eig: 1e-9,
            max_iter: 200_000,
            tol_cond: 1e-8,
            tol_op: 1e-9,
            oracle_max_dof: 2500,
            tol_res: 1e-8,
            support_tol: 1e-12,
            exec: Exec::default(),
        }
    }
}

impl Settings {
    pub fn cond_tol(&self, lambda: f64) -> f64 {
        self.tol_cond * (1.0 + lambda.abs())
    }
}
