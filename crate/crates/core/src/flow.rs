//! The linear flow `t ↦ e^{tD}` on the algebra, adapted quadratic forms and
//! contraction/expansion constants.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::AlgebraVector;
use crate::linalg;
use crate::spectral::{Derivation, DEFAULT_TOL_REALPART};

pub use crate::linalg::expm;

pub const DEFAULT_SLACK: f64 = 1e-3;
pub const DEFAULT_SAMPLING_HORIZON: f64 = 50.0;
const SAMPLING_POINTS: usize = 2001;

/// `t ↦ e^{tD}` for a fixed generator `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFlow {
    generator: DMatrix<f64>,
    abscissa: f64,
}

impl LinearFlow {
    pub fn new(d: &Derivation) -> Self {
        Self::from_matrix(d.matrix()).expect("validated derivations are square and finite")
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput("flow generator must be square".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("flow generator has non-finite entries".into()));
        }
        Ok(Self { generator: m.clone(), abscissa: linalg::spectral_abscissa(m) })
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    /// Largest real part of the generator's spectrum.
    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    /// The time-reversed flow `t ↦ e^{-tD}`.
    pub fn reversed(&self) -> Self {
        Self::from_matrix(&(-&self.generator)).unwrap()
    }

    /// `e^{tD}`.
    pub fn propagator(&self, t: f64) -> Result<DMatrix<f64>> {
        if !t.is_finite() {
            return Err(Error::InvalidInput("flow time must be finite".into()));
        }
        expm(&(&self.generator * t))
    }

    /// `e^{tD} v`.
    pub fn apply(&self, t: f64, v: &AlgebraVector) -> Result<AlgebraVector> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        let out = self.propagator(t)? * v;
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow("linear flow"));
        }
        Ok(out)
    }
}

pub fn flow_linear(lf: &LinearFlow, t: f64, v: &AlgebraVector) -> Result<AlgebraVector> {
    lf.apply(t, v)
}

/// Quadratic form `Q(x) = xᵀPx` with `AᵀP + PA = -I` for a contracting `A`.
///
/// `Q` is a Lyapunov function: `d/dt Q(e^{tA}x) = -‖e^{tA}x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedForm {
    pub p: DMatrix<f64>,
    pub generator: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl AdaptedForm {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn value(&self, x: &AlgebraVector) -> f64 {
        x.dot(&(&self.p * x))
    }

    /// `‖AᵀP + PA + I‖_F`.
    pub fn lyapunov_residual(&self) -> f64 {
        let n = self.dim();
        (self.generator.transpose() * &self.p + &self.p * &self.generator + DMatrix::identity(n, n)).norm()
    }
}

/// Solves `AᵀP + PA = -I`; `A` must have spectral abscissa below `-tol_realpart`.
pub fn adapted_form(a: &DMatrix<f64>) -> Result<AdaptedForm> {
    adapted_form_with_tol(a, DEFAULT_TOL_REALPART)
}

pub fn adapted_form_with_tol(a: &DMatrix<f64>, tol_realpart: f64) -> Result<AdaptedForm> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::InvalidInput("adapted form needs a nonempty square matrix".into()));
    }
    let abscissa = linalg::spectral_abscissa(a);
    if abscissa >= -tol_realpart {
        return Err(Error::NotContracting { abscissa });
    }
    let n = a.nrows();
    let p = linalg::solve_lyapunov(a, &DMatrix::identity(n, n))?;
    let eig = SymmetricEigen::new(p.clone()).eigenvalues;
    let min_eigenvalue = eig.min();
    let max_eigenvalue = eig.max();
    if !(min_eigenvalue > 0.0) {
        return Err(Error::NonConvergence { what: "Lyapunov solve (P not positive definite)", residual: min_eigenvalue });
    }
    Ok(AdaptedForm { p, generator: a.clone(), min_eigenvalue, max_eigenvalue })
}

/// Constants with `‖e^{tD}v‖ ≤ c⁻¹ e^{-μt} ‖v‖` on a contracting subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionEstimate {
    pub c: f64,
    pub mu: f64,
    /// Constant valid for every `t ≥ 0`, from the adapted form of `A + μI`.
    pub c_global: f64,
    /// Spectral abscissa magnitude `μ₀` of the restriction.
    pub rate: f64,
    /// Horizon of the sampled check that fixes `c`.
    pub horizon: f64,
}

impl ContractionEstimate {
    /// Upper bound `c⁻¹ e^{-μt}` on the gain over time `t`.
    pub fn bound(&self, t: f64) -> f64 {
        (-self.mu * t).exp() / self.c
    }
}

/// Contraction constants of the flow restricted to `span(minus_basis)`.
pub fn contraction_constants(lf: &LinearFlow, minus_basis: &DMatrix<f64>) -> Result<ContractionEstimate> {
    contraction_constants_with(lf, minus_basis, DEFAULT_SLACK, DEFAULT_SAMPLING_HORIZON)
}

/// Expansion constants: `‖e^{tD}v‖ ≥ c e^{μt} ‖v‖` on `span(plus_basis)`.
pub fn expansion_constants(lf: &LinearFlow, plus_basis: &DMatrix<f64>) -> Result<ContractionEstimate> {
    contraction_constants(&lf.reversed(), plus_basis)
}

pub fn contraction_constants_with(
    lf: &LinearFlow,
    basis: &DMatrix<f64>,
    slack: f64,
    horizon: f64,
) -> Result<ContractionEstimate> {
    if basis.nrows() != lf.dim() {
        return Err(Error::DimensionMismatch { expected: lf.dim(), found: basis.nrows() });
    }
    if basis.ncols() == 0 {
        return Err(Error::InvalidInput("contraction constants need a nonempty subspace".into()));
    }
    if !(slack > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidInput("slack and horizon must be positive".into()));
    }
    let q = linalg::orthonormalize(basis);
    let a = q.transpose() * lf.generator() * &q;
    let form = adapted_form(&a)?;
    let rate = -linalg::spectral_abscissa(&a);
    if rate <= slack {
        return Err(Error::NotContracting { abscissa: -rate });
    }
    let mu = rate - slack;
    let c0 = (form.min_eigenvalue / form.max_eigenvalue).sqrt();

    let n = a.nrows();
    let shifted = &a + DMatrix::<f64>::identity(n, n) * mu;
    let global = adapted_form_with_tol(&shifted, 0.0)?;
    let c_global = (global.min_eigenvalue / global.max_eigenvalue).sqrt();

    let mut worst_gain = 0.0_f64;
    for i in 0..SAMPLING_POINTS {
        let t = horizon * i as f64 / (SAMPLING_POINTS - 1) as f64;
        let prop = expm(&(&a * t))?;
        let gain = prop.singular_values().max() * (mu * t).exp();
        worst_gain = worst_gain.max(gain);
    }
    let c = c0.min(1.0 / worst_gain);
    Ok(ContractionEstimate { c, mu, c_global, rate, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::fixtures::heisenberg;
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn flow_at_zero_is_identity() {
        let lf = LinearFlow::from_matrix(&diag(&[1.0, -2.0, -1.0])).unwrap();
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_eq!(lf.apply(0.0, &v).unwrap(), v);
    }

    #[test]
    fn diagonal_flow_scales_basis_vector() {
        let d = Derivation::diagonal(&[1.0, -2.0, -1.0], heisenberg()).unwrap();
        let lf = LinearFlow::new(&d);
        let v = lf.apply(1.0, &DVector::from_vec(vec![0.0, 1.0, 0.0])).unwrap();
        assert!((v[1] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!((v[0], v[2]), (0.0, 0.0));
    }

    #[test]
    fn semigroup_law() {
        let lf = LinearFlow::from_matrix(&DMatrix::from_row_slice(
            3,
            3,
            &[0.2, 1.0, 0.0, -1.0, -0.3, 0.5, 0.0, 0.4, -1.0],
        ))
        .unwrap();
        let v = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        for (s, t) in [(1.0, 2.0), (-3.0, 4.5), (9.0, -10.0)] {
            let lhs = lf.apply(s, &lf.apply(t, &v).unwrap()).unwrap();
            let rhs = lf.apply(s + t, &v).unwrap();
            assert!((&lhs - &rhs).norm() <= 1e-8 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn flow_overflow_is_an_error() {
        let lf = LinearFlow::from_matrix(&diag(&[2.0])).unwrap();
        assert!(matches!(lf.apply(400.0, &DVector::from_vec(vec![1.0])), Err(Error::Overflow(_))));
    }

    #[test]
    fn adapted_form_closed_forms() {
        let f = adapted_form(&diag(&[-1.0])).unwrap();
        assert!((f.p[(0, 0)] - 0.5).abs() < 1e-15);
        let f = adapted_form(&diag(&[-2.0])).unwrap();
        assert!((f.p[(0, 0)] - 0.25).abs() < 1e-15);
        let f = adapted_form(&diag(&[-1.0, -2.0])).unwrap();
        assert!((&f.p - diag(&[0.5, 0.25])).amax() < 1e-15);
        assert!(f.lyapunov_residual() < 1e-14);
    }

    #[test]
    fn adapted_form_rejects_non_contracting() {
        assert!(matches!(adapted_form(&diag(&[-1.0, 0.0])), Err(Error::NotContracting { .. })));
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(adapted_form(&rot), Err(Error::NotContracting { .. })));
    }

    #[test]
    fn contraction_constants_scalar() {
        let lf = LinearFlow::from_matrix(&diag(&[-1.0])).unwrap();
        let est = contraction_constants(&lf, &DMatrix::identity(1, 1)).unwrap();
        assert!((est.mu - 0.999).abs() < 1e-12);
        assert!((est.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contraction_constants_diagonal_block() {
        let lf = LinearFlow::from_matrix(&diag(&[3.0, -1.0, -2.0])).unwrap();
        let basis = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let est = contraction_constants(&lf, &basis).unwrap();
        assert!((est.mu - 0.999).abs() < 1e-12);
    }

    #[test]
    fn jordan_block_needs_small_c() {
        let lf = LinearFlow::from_matrix(&DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0])).unwrap();
        let est = contraction_constants(&lf, &DMatrix::identity(2, 2)).unwrap();
        assert!((est.mu - 0.999).abs() < 1e-12);
        assert!(est.c < 1.0);
        assert!(est.c_global <= est.c);
    }

    #[test]
    fn expansion_constants_on_unstable_part() {
        let lf = LinearFlow::from_matrix(&diag(&[2.0, -1.0])).unwrap();
        let basis = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let est = expansion_constants(&lf, &basis).unwrap();
        assert!((est.mu - 1.999).abs() < 1e-12);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        for t in [0.0, 1.0, 7.5] {
            let grown = lf.apply(t, &v).unwrap().norm();
            assert!(grown >= est.c * (est.mu * t).exp() * (1.0 - 1e-12));
        }
    }
}
