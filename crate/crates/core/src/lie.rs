//! Finite-dimensional real Lie algebras given by structure constants.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Coordinates of an algebra element in the declared ordered basis.
pub type AlgebraVector = DVector<f64>;

pub const DEFAULT_JACOBI_TOL: f64 = 1e-9;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// A real Lie algebra `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
///
/// Constants are antisymmetrized on construction. The largest defect seen
/// before that step is kept so validation can still report it.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    labels: Vec<String>,
    // flat c[(i * dim + j) * dim + k]
    constants: Vec<f64>,
    asymmetry: Option<AsymmetryDefect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymmetryDefect {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub defect: f64,
}

/// One failed axiom check inside a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum AxiomFailure {
    Antisymmetry { i: usize, j: usize, k: usize, defect: f64 },
    Jacobi { i: usize, j: usize, k: usize, residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tol: f64,
    pub max_jacobi_residual: f64,
    pub max_antisymmetry_defect: f64,
    pub failures: Vec<AxiomFailure>,
    pub pass: bool,
}

impl ValidationReport {
    /// The first failure as an error, if any.
    pub fn to_error(&self) -> Option<Error> {
        self.failures.first().map(|f| match *f {
            AxiomFailure::Antisymmetry { i, j, k, defect } => {
                Error::AntisymmetryViolation { i, j, k, defect }
            }
            AxiomFailure::Jacobi { i, j, k, residual } => Error::JacobiViolation { i, j, k, residual },
        })
    }
}

/// Lower central series `g = g_1 ⊇ g_2 ⊇ …` with `g_{m+1} = [g, g_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    /// Orthonormal basis of each term, starting with the whole algebra.
    pub terms: Vec<DMatrix<f64>>,
    /// Nilpotency step `k` (with `g_{k+1} = 0`), or `None` if the series
    /// stabilizes at a nonzero term.
    pub step: Option<usize>,
}

impl Filtration {
    pub fn dims(&self) -> Vec<usize> {
        self.terms.iter().map(|t| t.ncols()).collect()
    }

    pub fn is_nilpotent(&self) -> bool {
        self.step.is_some()
    }
}

impl LieAlgebra {
    /// Builds an algebra from a dense `c[i][j][k]` array.
    pub fn new(labels: Vec<String>, constants: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let dim = labels.len();
        if dim == 0 {
            return Err(Error::InvalidInput("Lie algebra dimension must be positive".into()));
        }
        if constants.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: constants.len() });
        }
        let mut flat = vec![0.0; dim * dim * dim];
        for (i, row) in constants.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            for (j, v) in row.iter().enumerate() {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
                }
                for (k, &c) in v.iter().enumerate() {
                    if !c.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "structure constant c[{i}][{j}][{k}] is not finite"
                        )));
                    }
                    flat[(i * dim + j) * dim + k] = c;
                }
            }
        }
        Ok(Self::from_flat(labels, flat))
    }

    /// Builds an algebra from a sparse list of brackets `[e_i, e_j] = v`.
    ///
    /// A pair given in only one orientation implies the other. When both
    /// orientations are given they are kept as written and antisymmetrized.
    pub fn from_brackets(labels: Vec<String>, brackets: &[(usize, usize, Vec<f64>)]) -> Result<Self> {
        let dim = labels.len();
        if dim == 0 {
            return Err(Error::InvalidInput("Lie algebra dimension must be positive".into()));
        }
        let mut flat = vec![0.0; dim * dim * dim];
        let mut given = vec![false; dim * dim];
        for (i, j, v) in brackets {
            let (i, j) = (*i, *j);
            if i >= dim || j >= dim {
                return Err(Error::InvalidInput(format!("bracket index ({i}, {j}) out of range")));
            }
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
            if given[i * dim + j] {
                return Err(Error::InvalidInput(format!("bracket ({i}, {j}) listed twice")));
            }
            if let Some(k) = v.iter().position(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("bracket ({i}, {j}) entry {k} is not finite")));
            }
            given[i * dim + j] = true;
            for (k, &c) in v.iter().enumerate() {
                flat[(i * dim + j) * dim + k] = c;
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                if i != j && given[i * dim + j] && !given[j * dim + i] {
                    for k in 0..dim {
                        flat[(j * dim + i) * dim + k] = -flat[(i * dim + j) * dim + k];
                    }
                }
            }
        }
        Ok(Self::from_flat(labels, flat))
    }

    /// The abelian algebra `ℝⁿ` with basis `e1..en`.
    pub fn abelian(dim: usize) -> Result<Self> {
        Self::from_brackets(default_labels(dim), &[])
    }

    fn from_flat(labels: Vec<String>, mut flat: Vec<f64>) -> Self {
        let dim = labels.len();
        let mut worst: Option<AsymmetryDefect> = None;
        for i in 0..dim {
            for j in i..dim {
                for k in 0..dim {
                    let a = flat[(i * dim + j) * dim + k];
                    let b = flat[(j * dim + i) * dim + k];
                    let defect = (a + b).abs();
                    if defect > 0.0 && worst.map_or(true, |w| defect > w.defect) {
                        worst = Some(AsymmetryDefect { i, j, k, defect });
                    }
                    let anti = 0.5 * (a - b);
                    flat[(i * dim + j) * dim + k] = anti;
                    flat[(j * dim + i) * dim + k] = -anti;
                }
            }
        }
        Self { dim, labels, constants: flat, asymmetry: worst }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Antisymmetrized constant `c[i][j][k]`.
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.constants[(i * self.dim + j) * self.dim + k]
    }

    /// Largest antisymmetry defect of the constants as they were supplied.
    pub fn asymmetry_defect(&self) -> Option<AsymmetryDefect> {
        self.asymmetry
    }

    /// Nonzero brackets `[e_i, e_j]` with `i < j`.
    pub fn nonzero_brackets(&self) -> Vec<(usize, usize, Vec<f64>)> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let v: Vec<f64> = (0..self.dim).map(|k| self.constant(i, j, k)).collect();
                if v.iter().any(|&c| c != 0.0) {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn basis_vector(&self, i: usize) -> AlgebraVector {
        let mut v = AlgebraVector::zeros(self.dim);
        v[i] = 1.0;
        v
    }

    fn check_len(&self, v: &AlgebraVector) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Ok(())
    }

    /// `[a, b] = Σ_{i,j} a_i b_j [e_i, e_j]`.
    pub fn bracket(&self, a: &AlgebraVector, b: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_len(a)?;
        self.check_len(b)?;
        Ok(self.bracket_unchecked(a, b))
    }

    pub(crate) fn bracket_unchecked(&self, a: &AlgebraVector, b: &AlgebraVector) -> AlgebraVector {
        let n = self.dim;
        let mut out = AlgebraVector::zeros(n);
        for i in 0..n {
            let ai = a[i];
            if ai == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = ai * b[j];
                if w == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += w * self.constants[base + k];
                }
            }
        }
        out
    }

    /// Matrix of `ad_x = [x, ·]`.
    pub fn ad(&self, x: &AlgebraVector) -> Result<DMatrix<f64>> {
        self.check_len(x)?;
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.bracket_unchecked(x, &self.basis_vector(j));
            m.set_column(j, &col);
        }
        Ok(m)
    }

    /// Checks antisymmetry of the supplied constants and the Jacobi identity
    /// on every basis triple.
    pub fn validate_jacobi(&self, tol: f64) -> ValidationReport {
        let n = self.dim;
        let mut failures = Vec::new();
        let max_anti = self.asymmetry.map_or(0.0, |a| a.defect);
        if let Some(a) = self.asymmetry {
            if a.defect > tol {
                failures.push(AxiomFailure::Antisymmetry { i: a.i, j: a.j, k: a.k, defect: a.defect });
            }
        }
        let basis: Vec<AlgebraVector> = (0..n).map(|i| self.basis_vector(i)).collect();
        let mut max_jacobi = 0.0_f64;
        let mut worst: Option<(usize, usize, usize, f64)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                let eij = self.bracket_unchecked(&basis[i], &basis[j]);
                for k in (j + 1)..n {
                    let t1 = self.bracket_unchecked(&eij, &basis[k]);
                    let ejk = self.bracket_unchecked(&basis[j], &basis[k]);
                    let t2 = self.bracket_unchecked(&ejk, &basis[i]);
                    let eki = self.bracket_unchecked(&basis[k], &basis[i]);
                    let t3 = self.bracket_unchecked(&eki, &basis[j]);
                    let r = (t1 + t2 + t3).amax();
                    if r > max_jacobi {
                        max_jacobi = r;
                        worst = Some((i, j, k, r));
                    }
                }
            }
        }
        // triples with a repeated index vanish identically once c is antisymmetric
        if let Some((i, j, k, residual)) = worst {
            if residual > tol {
                failures.push(AxiomFailure::Jacobi { i, j, k, residual });
            }
        }
        ValidationReport {
            tol,
            max_jacobi_residual: max_jacobi,
            max_antisymmetry_defect: max_anti,
            pass: failures.is_empty(),
            failures,
        }
    }

    /// Lower central series computed with SVD rank decisions at threshold
    /// `rank_tol × σ_max`.
    pub fn lower_central_series(&self, rank_tol: f64) -> Filtration {
        let n = self.dim;
        let scale = self.constants.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let abs_floor = 1e-13 * scale.max(1.0);
        let mut terms = vec![DMatrix::<f64>::identity(n, n)];
        loop {
            let current = terms.last().unwrap();
            let d = current.ncols();
            if d == 0 {
                let step = terms.len() - 1;
                return Filtration { terms, step: Some(step) };
            }
            let mut spanning = DMatrix::zeros(n, n * d);
            for i in 0..n {
                let ei = self.basis_vector(i);
                for c in 0..d {
                    let v = self.bracket_unchecked(&ei, &current.column(c).clone_owned());
                    spanning.set_column(i * d + c, &v);
                }
            }
            let next = linalg::column_span(&spanning, rank_tol, abs_floor);
            if next.ncols() >= d {
                return Filtration { terms, step: None };
            }
            terms.push(next);
        }
    }

    pub fn is_nilpotent(&self) -> bool {
        self.lower_central_series(DEFAULT_RANK_TOL).is_nilpotent()
    }

    /// Nilpotency step, if nilpotent.
    pub fn nilpotency_step(&self) -> Option<usize> {
        self.lower_central_series(DEFAULT_RANK_TOL).step
    }
}

pub fn default_labels(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("e{i}")).collect()
}

/// Reference algebras used across tests, examples and benches.
pub mod fixtures {
    use super::*;

    /// `[e1, e2] = e3`.
    pub fn heisenberg() -> LieAlgebra {
        LieAlgebra::from_brackets(default_labels(3), &[(0, 1, vec![0.0, 0.0, 1.0])]).unwrap()
    }

    /// Four-dimensional filiform algebra of step 3: `[e1, e2] = e3`, `[e1, e3] = e4`.
    pub fn filiform4() -> LieAlgebra {
        LieAlgebra::from_brackets(
            default_labels(4),
            &[(0, 1, vec![0.0, 0.0, 1.0, 0.0]), (0, 2, vec![0.0, 0.0, 0.0, 1.0])],
        )
        .unwrap()
    }

    /// Standard filiform algebra of dimension `n`: `[e1, e_i] = e_{i+1}` for `2 ≤ i < n`.
    /// Its nilpotency step is `n - 1`.
    pub fn filiform(n: usize) -> LieAlgebra {
        let brackets: Vec<_> = (1..n - 1)
            .map(|i| {
                let mut v = vec![0.0; n];
                v[i + 1] = 1.0;
                (0, i, v)
            })
            .collect();
        LieAlgebra::from_brackets(default_labels(n), &brackets).unwrap()
    }

    /// `sl(2, ℝ)` in the basis `(h, e, f)`.
    pub fn sl2() -> LieAlgebra {
        LieAlgebra::from_brackets(
            vec!["h".into(), "e".into(), "f".into()],
            &[
                (0, 1, vec![0.0, 2.0, 0.0]),
                (0, 2, vec![0.0, 0.0, -2.0]),
                (1, 2, vec![1.0, 0.0, 0.0]),
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn heisenberg_bracket() {
        let h = heisenberg();
        let z = h.bracket(&h.basis_vector(0), &h.basis_vector(1)).unwrap();
        assert_eq!(z, h.basis_vector(2));
        let z = h.bracket(&h.basis_vector(1), &h.basis_vector(0)).unwrap();
        assert_eq!(z, -h.basis_vector(2));
    }

    #[test]
    fn self_bracket_vanishes() {
        let h = filiform4();
        let v = AlgebraVector::from_vec(vec![0.3, -1.2, 2.0, 0.7]);
        assert_eq!(h.bracket(&v, &v).unwrap().amax(), 0.0);
    }

    #[test]
    fn abelian_bracket_is_zero() {
        let a = LieAlgebra::abelian(2).unwrap();
        let z = a.bracket(&a.basis_vector(0), &a.basis_vector(1)).unwrap();
        assert_eq!(z, AlgebraVector::zeros(2));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let h = heisenberg();
        let err = h.bracket(&AlgebraVector::zeros(2), &AlgebraVector::zeros(3)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 3, found: 2 });
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(LieAlgebra::abelian(0).is_err());
        assert!(LieAlgebra::abelian(1).is_ok());
    }

    #[test]
    fn jacobi_passes_on_fixtures() {
        for alg in [heisenberg(), filiform4(), sl2(), LieAlgebra::abelian(4).unwrap()] {
            let r = alg.validate_jacobi(DEFAULT_JACOBI_TOL);
            assert!(r.pass, "{r:?}");
            assert_eq!(r.max_jacobi_residual, 0.0);
        }
    }

    #[test]
    fn single_entry_perturbation_is_flagged_as_asymmetry() {
        let h = heisenberg();
        let mut c = vec![vec![vec![0.0; 3]; 3]; 3];
        c[0][1][2] = 1.0 + 1e-3;
        c[1][0][2] = -1.0;
        let perturbed = LieAlgebra::new(h.labels().to_vec(), c).unwrap();
        let r = perturbed.validate_jacobi(DEFAULT_JACOBI_TOL);
        assert!(!r.pass);
        match r.failures[0] {
            AxiomFailure::Antisymmetry { i, j, k, defect } => {
                assert_eq!((i, j, k), (0, 1, 2));
                assert!((defect - 1e-3).abs() < 1e-12);
            }
            ref other => panic!("unexpected failure {other:?}"),
        }
    }

    #[test]
    fn jacobi_failure_reports_triple() {
        // [e1,e2]=e3, [e2,e3]=e1, [e3,e1]=e1 breaks Jacobi
        let alg = LieAlgebra::from_brackets(
            default_labels(3),
            &[
                (0, 1, vec![0.0, 0.0, 1.0]),
                (1, 2, vec![1.0, 0.0, 0.0]),
                (2, 0, vec![1.0, 0.0, 0.0]),
            ],
        )
        .unwrap();
        let r = alg.validate_jacobi(DEFAULT_JACOBI_TOL);
        assert!(!r.pass);
        assert!(matches!(r.failures[0], AxiomFailure::Jacobi { i: 0, j: 1, k: 2, .. }));
        assert!(matches!(r.to_error(), Some(Error::JacobiViolation { .. })));
    }

    #[test]
    fn lower_central_series_dims() {
        let f = heisenberg().lower_central_series(DEFAULT_RANK_TOL);
        assert_eq!(f.dims(), vec![3, 1, 0]);
        assert_eq!(f.step, Some(2));

        let f = LieAlgebra::abelian(2).unwrap().lower_central_series(DEFAULT_RANK_TOL);
        assert_eq!(f.dims(), vec![2, 0]);
        assert_eq!(f.step, Some(1));

        let f = filiform4().lower_central_series(DEFAULT_RANK_TOL);
        assert_eq!(f.dims(), vec![4, 2, 1, 0]);
        assert_eq!(f.step, Some(3));

        let f = sl2().lower_central_series(DEFAULT_RANK_TOL);
        assert_eq!(f.dims(), vec![3]);
        assert_eq!(f.step, None);
    }

    #[test]
    fn nilpotency() {
        assert!(heisenberg().is_nilpotent());
        assert!(LieAlgebra::abelian(3).unwrap().is_nilpotent());
        assert!(!sl2().is_nilpotent());
        assert_eq!(filiform(7).nilpotency_step(), Some(6));
    }

    #[test]
    fn duplicate_bracket_rejected() {
        let r = LieAlgebra::from_brackets(
            default_labels(3),
            &[(0, 1, vec![0.0, 0.0, 1.0]), (0, 1, vec![0.0, 0.0, 1.0])],
        );
        assert!(r.is_err());
    }
}
