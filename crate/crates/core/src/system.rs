//! JSON description of a Lie algebra together with a derivation.
//!
//! ```json
//! {
//!   "dimension": 3,
//!   "basis": ["x", "y", "z"],
//!   "brackets": [{"i": 0, "j": 1, "result": [0, 0, 1]}],
//!   "derivation": [[1, 0, 0], [0, -2, 0], [0, 0, -1]],
//!   "tolerances": {"leibniz": 1e-9}
//! }
//! ```
//!
//! Brackets are sparse and 0-based; `[e_j, e_i]` is implied by `[e_i, e_j]`.
//! The derivation is given row by row.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{default_labels, LieAlgebra, DEFAULT_JACOBI_TOL, DEFAULT_RANK_TOL};
use crate::spectral::{validate_leibniz, Derivation};
use crate::spectral::{DEFAULT_GRADING_TOL, DEFAULT_LEIBNIZ_TOL, DEFAULT_SEMISIMPLE_TOL, DEFAULT_TOL_REALPART};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketSpec {
    pub i: usize,
    pub j: usize,
    pub result: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub jacobi: f64,
    pub leibniz: f64,
    pub realpart: f64,
    pub rank: f64,
    pub grading: f64,
    pub semisimple: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jacobi: DEFAULT_JACOBI_TOL,
            leibniz: DEFAULT_LEIBNIZ_TOL,
            realpart: DEFAULT_TOL_REALPART,
            rank: DEFAULT_RANK_TOL,
            grading: DEFAULT_GRADING_TOL,
            semisimple: DEFAULT_SEMISIMPLE_TOL,
        }
    }
}

impl Tolerances {
    pub fn check(&self) -> Result<()> {
        let all = [
            ("jacobi", self.jacobi),
            ("leibniz", self.leibniz),
            ("realpart", self.realpart),
            ("rank", self.rank),
            ("grading", self.grading),
            ("semisimple", self.semisimple),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("tolerance {name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// File-level description, before any validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis: Vec<String>,
    #[serde(default)]
    pub brackets: Vec<BracketSpec>,
    pub derivation: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

/// A validated algebra and derivation.
#[derive(Debug, Clone)]
pub struct System {
    pub algebra: Arc<LieAlgebra>,
    pub derivation: Derivation,
    pub tolerances: Tolerances,
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            message: e.to_string(),
            line: e.line(),
            column: e.column(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Describes an existing algebra and derivation.
    pub fn from_parts(alg: &LieAlgebra, d: &DMatrix<f64>, tolerances: Option<Tolerances>) -> Self {
        let brackets = alg
            .nonzero_brackets()
            .into_iter()
            .map(|(i, j, v)| BracketSpec { i, j, result: v.iter().cloned().collect() })
            .collect();
        Self {
            dimension: alg.dim(),
            basis: alg.labels().to_vec(),
            brackets,
            derivation: d.row_iter().map(|r| r.iter().cloned().collect()).collect(),
            tolerances,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.unwrap_or_default()
    }

    /// The algebra as written, without the Jacobi check.
    pub fn algebra(&self) -> Result<LieAlgebra> {
        let n = self.dimension;
        let labels = if self.basis.is_empty() {
            default_labels(n)
        } else if self.basis.len() == n {
            self.basis.clone()
        } else {
            return Err(Error::DimensionMismatch { expected: n, found: self.basis.len() });
        };
        let brackets: Vec<(usize, usize, Vec<f64>)> =
            self.brackets.iter().map(|b| (b.i, b.j, b.result.clone())).collect();
        LieAlgebra::from_brackets(labels, &brackets)
    }

    /// The derivation matrix as written, without the Leibniz check.
    pub fn derivation_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.dimension;
        if self.derivation.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.derivation.len() });
        }
        if let Some(row) = self.derivation.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
        let flat: Vec<f64> = self.derivation.iter().flatten().cloned().collect();
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("derivation has non-finite entries".into()));
        }
        Ok(DMatrix::from_row_slice(n, n, &flat))
    }

    /// Builds the algebra, then checks the Jacobi identity and the Leibniz rule.
    pub fn validate(&self) -> Result<System> {
        let tol = self.tolerances();
        tol.check()?;
        let algebra = Arc::new(self.algebra()?);
        let matrix = self.derivation_matrix()?;
        if let Some(err) = algebra.validate_jacobi(tol.jacobi).to_error() {
            return Err(err);
        }
        let derivation = validate_leibniz(&matrix, algebra.clone(), tol.leibniz)?;
        Ok(System { algebra, derivation, tolerances: tol })
    }
}

pub fn parse_system_str(text: &str) -> Result<System> {
    SystemSpec::from_json(text)?.validate()
}

/// Reads, parses and validates a system file.
pub fn parse_system(path: impl AsRef<Path>) -> Result<System> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_system_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEIS: &str = r#"{
        "dimension": 3,
        "basis": ["x", "y", "z"],
        "brackets": [{"i": 0, "j": 1, "result": [0, 0, 1]}],
        "derivation": [[1, 0, 0], [0, -2, 0], [0, 0, -1]]
    }"#;

    #[test]
    fn heisenberg_parses() {
        let sys = parse_system_str(HEIS).unwrap();
        assert_eq!(sys.algebra.dim(), 3);
        assert_eq!(sys.algebra.constant(1, 0, 2), -1.0);
        assert_eq!(sys.derivation.matrix()[(1, 1)], -2.0);
        assert_eq!(sys.tolerances, Tolerances::default());
    }

    #[test]
    fn leibniz_failure_is_reported() {
        let text = HEIS.replace("[0, 0, -1]]", "[0, 0, 0]]");
        assert!(matches!(parse_system_str(&text), Err(Error::LeibnizViolation { .. })));
    }

    #[test]
    fn jacobi_failure_is_reported() {
        let text = r#"{"dimension": 3, "brackets": [
            {"i": 0, "j": 1, "result": [0, 0, 1]},
            {"i": 1, "j": 2, "result": [0, 1, 0]}],
            "derivation": [[0,0,0],[0,0,0],[0,0,0]]}"#;
        assert!(matches!(parse_system_str(text), Err(Error::JacobiViolation { .. })));
    }

    #[test]
    fn empty_brackets_give_abelian() {
        let sys = parse_system_str(r#"{"dimension": 2, "brackets": [], "derivation": [[0, 1], [-1, 0]]}"#).unwrap();
        assert!(sys.algebra.nonzero_brackets().is_empty());
        assert_eq!(sys.algebra.labels(), ["e1", "e2"]);
    }

    #[test]
    fn parse_errors_carry_location() {
        match SystemSpec::from_json("{\n  \"dimension\": 3,\n  oops\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(SystemSpec::from_json(r#"{"dimension": 1, "derivation": [[0]], "extra": 1}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn shape_errors() {
        let bad = HEIS.replace("[0, -2, 0]", "[0, -2]");
        assert!(matches!(parse_system_str(&bad), Err(Error::DimensionMismatch { .. })));
        let bad = HEIS.replace("\"result\": [0, 0, 1]", "\"result\": [0, 1]");
        assert!(matches!(parse_system_str(&bad), Err(Error::DimensionMismatch { .. })));
        let bad = HEIS.replace("\"i\": 0", "\"i\": 7");
        assert!(matches!(parse_system_str(&bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn round_trip() {
        let spec = SystemSpec::from_json(HEIS).unwrap();
        assert_eq!(SystemSpec::from_json(&spec.to_json()).unwrap(), spec);
        let sys = spec.validate().unwrap();
        let again = SystemSpec::from_parts(&sys.algebra, sys.derivation.matrix(), None);
        assert_eq!(again, spec);
    }

    #[test]
    fn custom_tolerances() {
        let text = HEIS.replace("]]\n", "]],\n \"tolerances\": {\"leibniz\": 1e-3}\n");
        let spec = SystemSpec::from_json(&text).unwrap();
        assert_eq!(spec.tolerances().leibniz, 1e-3);
        assert_eq!(spec.tolerances().jacobi, DEFAULT_JACOBI_TOL);
    }
}
