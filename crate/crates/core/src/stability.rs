//! Lyapunov exponents at the identity and stability verdicts.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::flow::{contraction_constants, ContractionEstimate, LinearFlow};
use crate::lie::{AlgebraVector, LieAlgebra};
use crate::spectral::{decompose_matrix, is_semisimple_on, Derivation, Eigenvalue, SpectralDecomposition};
use crate::spectral::{DEFAULT_SEMISIMPLE_TOL, DEFAULT_TOL_REALPART};

/// Relative size below which a layer component of `v` is treated as zero.
pub const DEFAULT_COMPONENT_TOL: f64 = 1e-10;

/// `λ(e, v)`: the largest layer real part carrying a nonzero component of `v`.
pub fn lyapunov_exact(sd: &SpectralDecomposition, v: &AlgebraVector, tol: f64) -> Result<f64> {
    if v.len() != sd.dim() {
        return Err(Error::DimensionMismatch { expected: sd.dim(), found: v.len() });
    }
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let comps = sd.layer_components(v);
    let threshold = tol * norm;
    let mut best: Option<f64> = None;
    for (layer, c) in sd.layers.iter().zip(&comps) {
        if c.norm() > threshold {
            best = Some(best.map_or(layer.real_part, |b: f64| b.max(layer.real_part)));
        }
    }
    // every component below threshold only happens for a degenerate tol
    Ok(best.unwrap_or_else(|| {
        let (i, _) = comps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("at least one layer");
        sd.layers[i].real_part
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovResult {
    pub v: Vec<f64>,
    pub exact: f64,
    /// `(T, (1/T) log‖e^{TD}v‖)`.
    pub estimate_curve: Vec<(f64, f64)>,
    /// Smallest `C` with `|estimate(T) - exact| ≤ C (1 + log T) / T` on the grid.
    pub gap_constant: f64,
    pub warning: Option<String>,
}

/// Samples `(1/T) log‖e^{TD}v‖` on `t_grid` next to the exact exponent.
///
/// Grid points past floating-point range are dropped and reported in `warning`.
pub fn lyapunov_estimate(lf: &LinearFlow, v: &AlgebraVector, t_grid: &[f64]) -> Result<LyapunovResult> {
    if v.len() != lf.dim() {
        return Err(Error::DimensionMismatch { expected: lf.dim(), found: v.len() });
    }
    if v.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidInput("T grid is empty".into()));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("T grid must be positive and strictly increasing".into()));
    }
    let sd = decompose_matrix(lf.generator(), DEFAULT_TOL_REALPART)?;
    let exact = lyapunov_exact(&sd, v, DEFAULT_COMPONENT_TOL)?;

    let mut curve = Vec::with_capacity(t_grid.len());
    let mut warning = None;
    for &t in t_grid {
        let norm = match lf.apply(t, v) {
            Ok(w) => linalg::scaled_norm(&w),
            Err(Error::Overflow(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if !(norm.is_finite() && norm > 0.0) {
            let what = if norm == 0.0 { "underflows" } else { "overflows" };
            warning = Some(format!("‖e^(TD)v‖ {what} at T = {t}; grid truncated to {} points", curve.len()));
            break;
        }
        curve.push((t, norm.ln() / t));
    }
    let gap_constant = curve
        .iter()
        .map(|&(t, est)| (est - exact).abs() * t / (1.0 + t.max(1.0).ln()))
        .fold(0.0, f64::max);
    Ok(LyapunovResult { v: v.iter().cloned().collect(), exact, estimate_curve: curve, gap_constant, warning })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AsymptoticallyAndExponentiallyStable,
    Stable,
    Unstable,
    StableConditionMetConverseUnverified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub eigenvalues: Vec<Eigenvalue>,
    pub d_plus: usize,
    pub d_zero: usize,
    pub d_minus: usize,
    /// Whether `D` restricted to the center part is diagonalizable over ℂ
    /// (absent when the center part is trivial).
    pub zero_part_semisimple: Option<bool>,
    pub algebra_nilpotent: bool,
    pub abscissa: f64,
    pub contraction: Option<ContractionEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCertificate {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

impl Evidence {
    /// The verdict these facts imply.
    pub fn implied_verdict(&self) -> Verdict {
        if self.d_plus == 0 && self.d_zero == 0 {
            Verdict::AsymptoticallyAndExponentiallyStable
        } else if self.d_plus == 0 && self.zero_part_semisimple == Some(true) {
            Verdict::Stable
        } else if self.d_plus > 0 || self.algebra_nilpotent {
            Verdict::Unstable
        } else {
            Verdict::StableConditionMetConverseUnverified
        }
    }
}

impl StabilityCertificate {
    pub fn is_consistent(&self) -> bool {
        let e = &self.evidence;
        self.verdict == e.implied_verdict()
            && (self.verdict == Verdict::AsymptoticallyAndExponentiallyStable) == e.contraction.is_some()
            && e.zero_part_semisimple.is_some() == (e.d_zero > 0)
    }
}

/// Stability of the identity for the flow of `d`.
pub fn classify_identity_stability(
    alg: &LieAlgebra,
    d: &Derivation,
    sd: &SpectralDecomposition,
) -> Result<StabilityCertificate> {
    classify_matrix(alg, d.matrix(), sd)
}

fn classify_matrix(alg: &LieAlgebra, d: &DMatrix<f64>, sd: &SpectralDecomposition) -> Result<StabilityCertificate> {
    if d.nrows() != alg.dim() || sd.dim() != alg.dim() {
        return Err(Error::DimensionMismatch { expected: alg.dim(), found: d.nrows() });
    }
    let (d_plus, d_zero, d_minus) = sd.signature();
    let zero_part_semisimple = if d_zero > 0 {
        Some(is_semisimple_on(d, &sd.zero_basis, DEFAULT_SEMISIMPLE_TOL)?)
    } else {
        None
    };
    let contraction = if d_plus == 0 && d_zero == 0 {
        let n = alg.dim();
        Some(contraction_constants(&LinearFlow::from_matrix(d)?, &DMatrix::identity(n, n))?)
    } else {
        None
    };
    let evidence = Evidence {
        eigenvalues: sd.eigenvalues.clone(),
        d_plus,
        d_zero,
        d_minus,
        zero_part_semisimple,
        algebra_nilpotent: alg.is_nilpotent(),
        abscissa: sd.abscissa(),
        contraction,
    };
    Ok(StabilityCertificate { verdict: evidence.implied_verdict(), evidence })
}
