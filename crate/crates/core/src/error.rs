use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Byte-offset parse failure with the set of tokens that would have been accepted.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at offset {offset}: expected {}", expected.join(" | "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {message}")]
pub struct EvalDomainError {
    pub message: String,
}

impl EvalDomainError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    EvalDomain(#[from] EvalDomainError),
    #[error("{err} at node {node}")]
    EvalDomainAt { err: EvalDomainError, node: usize },
    #[error("invalid grid: {0}")]
    BadGridSpec(String),
    #[error("sub-rectangle contains no interior node")]
    EmptySubdomain,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("matrix is singular (pivot {pivot:e} at step {step})")]
    SingularMatrix { step: usize, pivot: f64 },
    #[error("matrix has {n} rows, above the dense budget of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("power iteration did not converge in {iterations} iterations (width {width:e})")]
    NoConvergence { iterations: usize, width: f64 },
    #[error("matrix has a negative entry {value} at ({row}, {col})")]
    NotNonnegative { row: usize, col: usize, value: f64 },
    #[error("matrix is not a Z-matrix: off-diagonal entry {value} at ({row}, {col})")]
    NotZMatrix { row: usize, col: usize, value: f64 },
    #[error("matrix digraph is not strongly connected ({components} components)")]
    NotIrreducible { components: usize },
    #[error("coefficient is not elliptic at node {node}: smallest eigenvalue {lambda_min}")]
    NonEllipticCoefficient { node: usize, lambda_min: f64 },
    #[error("linearized flux is not elliptic at node {node} (species {species}, s = {s}): {lambda_min}")]
    NonEllipticLinearization {
        node: usize,
        species: usize,
        s: f64,
        lambda_min: f64,
    },
    #[error("structure unsupported: {0}")]
    StructureUnsupported(String),
    #[error("no feasible epsilon: {0}")]
    InfeasibleEpsilon(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::EvalDomain(_)
            | Error::EvalDomainAt { .. }
            | Error::BadGridSpec(_)
            | Error::EmptySubdomain
            | Error::DimMismatch { .. }
            | Error::NonEllipticCoefficient { .. }
            | Error::NonEllipticLinearization { .. }
            | Error::Validation(_)
            | Error::Syntax { .. } => 2,
            Error::SingularMatrix { .. }
            | Error::TooLarge { .. }
            | Error::NoConvergence { .. }
            | Error::NotNonnegative { .. } => 3,
            Error::NotZMatrix { .. }
            | Error::NotIrreducible { .. }
            | Error::StructureUnsupported(_)
            | Error::InfeasibleEpsilon(_) => 4,
        }
    }

    /// Short machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) | Error::Syntax { .. } => "ParseError",
            Error::EvalDomain(_) | Error::EvalDomainAt { .. } => "EvalDomainError",
            Error::BadGridSpec(_) => "BadGridSpec",
            Error::EmptySubdomain => "EmptySubdomain",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::TooLarge { .. } => "TooLarge",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotNonnegative { .. } => "NotNonnegative",
            Error::NotZMatrix { .. } => "NotZMatrix",
            Error::NotIrreducible { .. } => "NotIrreducible",
            Error::NonEllipticCoefficient { .. } => "NonEllipticCoefficient",
            Error::NonEllipticLinearization { .. } => "NonEllipticLinearization",
            Error::StructureUnsupported(_) => "StructureUnsupported",
            Error::InfeasibleEpsilon(_) => "InfeasibleEpsilon",
            Error::Validation(_) => "ValidationError",
        }
    }
}
