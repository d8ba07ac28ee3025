//! Discrete comparison-principle analysis for weakly coupled elliptic systems.
//!
//! A system `L u + M u = f` with Dirichlet data is discretized by monotone
//! finite differences ([`assembly`]); principal eigenvalues of the cooperative
//! part come from Perron power iteration ([`spectral`]); [`certify`] evaluates
//! sufficient and failure conditions; [`oracle`] decides inverse-positivity
//! by direct inversion.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the stencil algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod certify;
pub mod error;
pub mod expr;
pub mod fieldfile;
pub mod graph;
pub mod linalg;
pub mod oracle;
pub mod settings;
pub mod spectral;
pub mod mesh;
pub mod par;
pub mod problem;
pub mod quasilinear;
pub mod system;

pub use error::{Error, EvalDomainError, ParseError, Result};
pub use expr::{eval_expr, parse_expr, sample_field, Expr, SampledField};
pub use mesh::{Grid, SubdomainMask};
pub use par::Exec;
pub use settings::Settings;
pub use system::{DiscreteSystem, ScalarOperatorSpec, SystemSpec};
