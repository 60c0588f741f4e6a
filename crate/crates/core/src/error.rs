use thiserror::Error;

/// Error type shared by every analysis in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { message: String, line: usize, column: usize },

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("Jacobi identity violated on basis triple ({i}, {j}, {k}): residual {residual:.3e}")]
    JacobiViolation {
        i: usize,
        j: usize,
        k: usize,
        residual: f64,
    },

    #[error("structure constants not antisymmetric at ({i}, {j}, {k}): defect {defect:.3e}")]
    AntisymmetryViolation {
        i: usize,
        j: usize,
        k: usize,
        defect: f64,
    },

    #[error("Leibniz rule violated on basis pair ({i}, {j}): residual {residual:.3e}")]
    LeibnizViolation { i: usize, j: usize, residual: f64 },

    #[error("eigenvalue clusters at real parts {left:.3e} and {right:.3e} are too close to classify")]
    ClusterAmbiguity { left: f64, right: f64 },

    #[error("subspace is not invariant under the derivation: residual {residual:.3e}")]
    InvariantSubspaceViolation { residual: f64 },

    #[error("matrix is not contracting: spectral abscissa {abscissa:.6e}")]
    NotContracting { abscissa: f64 },

    #[error("derivation is not hyperbolic: center dimension {center_dim}")]
    NotHyperbolic { center_dim: usize },

    #[error("Lie algebra is not nilpotent")]
    NotNilpotent,

    #[error("nilpotency step {step} exceeds the supported BCH depth {max}")]
    StepTooLarge { step: usize, max: usize },

    #[error("stable/unstable dimensions differ: source (d+ = {src_plus}, d- = {src_minus}), target (d+ = {dst_plus}, d- = {dst_minus})")]
    SignatureMismatch {
        src_plus: usize,
        src_minus: usize,
        dst_plus: usize,
        dst_minus: usize,
    },

    #[error("{what} did not converge (residual {residual:.3e})")]
    NonConvergence { what: &'static str, residual: f64 },

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("floating-point overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Parse { .. } => "ParseError",
            Error::Io { .. } => "IoError",
            Error::JacobiViolation { .. } => "JacobiViolation",
            Error::AntisymmetryViolation { .. } => "AntisymmetryViolation",
            Error::LeibnizViolation { .. } => "LeibnizViolation",
            Error::ClusterAmbiguity { .. } => "ClusterAmbiguity",
            Error::InvariantSubspaceViolation { .. } => "InvariantSubspaceViolation",
            Error::NotContracting { .. } => "NotContracting",
            Error::NotHyperbolic { .. } => "NotHyperbolic",
            Error::NotNilpotent => "NotNilpotent",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::SignatureMismatch { .. } => "DimensionMismatch",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::ZeroVector => "ZeroVector",
            Error::Overflow(_) => "Overflow",
        }
    }
}
