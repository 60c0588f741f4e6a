//! Linear flows induced by derivations of finite-dimensional real Lie algebras.

pub mod conjugacy;
pub mod error;
pub mod flow;
pub mod group;
pub mod lie;
pub mod linalg;
pub mod spectral;
pub mod stability;
pub mod system;

pub use conjugacy::{build_group_conjugacy, verify_conjugacy, EuclideanConjugacy, GroupConjugacy, HyperbolicSystem, VerificationReport, VerifyOptions};
pub use error::{Error, Result};
pub use flow::{AdaptedForm, ContractionEstimate, LinearFlow};
pub use group::{gauge, AttractorReport, BchTable, Classification, GroupElement, NilpotentGroup};
pub use lie::{AlgebraVector, Filtration, LieAlgebra, ValidationReport};
pub use spectral::{Derivation, GradingReport, Part, SpectralDecomposition};
pub use stability::{LyapunovResult, StabilityCertificate, Verdict};
pub use system::{parse_system, System, SystemSpec, Tolerances};
