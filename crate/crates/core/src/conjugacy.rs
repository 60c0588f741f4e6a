//! Topological conjugacies between hyperbolic linear flows.
//!
//! On a contracting layer the conjugacy is built from adapted quadratic forms:
//! every nonzero orbit crosses the unit level set of `Q_A` exactly once, and
//! the crossing point is sent radially onto the unit level set of `Q_B`.
//! Expanding layers reuse the construction for `(-A, -B)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{adapted_form, expm, AdaptedForm, LinearFlow};
use crate::group::{gauge, GroupElement, NilpotentGroup};
use crate::spectral::{spectral_decompose, Derivation, Part, SpectralDecomposition};

const UNDERFLOW_GUARD: f64 = 1e-300;
const LEVEL_TOL: f64 = 1e-12;
const MAX_ROOT_ITER: usize = 200;

/// Conjugacy `ζ` between two contracting flows on `ℝᵈ`:
/// `ζ(e^{tA}x) = e^{tB}ζ(x)`.
#[derive(Debug, Clone)]
pub struct EuclideanConjugacy {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    form_a: AdaptedForm,
    form_b: AdaptedForm,
    identity: bool,
}

impl EuclideanConjugacy {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        if a.shape() != b.shape() || !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
        }
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            form_a: adapted_form(a)?,
            form_b: adapted_form(b)?,
            identity: a == b,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn source(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn target(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn source_form(&self) -> &AdaptedForm {
        &self.form_a
    }

    pub fn target_form(&self) -> &AdaptedForm {
        &self.form_b
    }

    /// The conjugacy in the opposite direction, `ζ⁻¹`.
    pub fn inverse(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
            form_a: self.form_b.clone(),
            form_b: self.form_a.clone(),
            identity: self.identity,
        }
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    /// `(ln Q_A(e^{tA}x), d/dt of the same)`; `None` on overflow.
    fn log_level(&self, t: f64, x: &DVector<f64>) -> Result<Option<(f64, f64)>> {
        let y = match expm(&(&self.a * t)) {
            Ok(m) => m * x,
            Err(Error::Overflow(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let q = self.form_a.value(&y);
        if !q.is_finite() {
            return Ok(None);
        }
        if q <= 0.0 {
            // underflow on the far side of the crossing
            return Ok(Some((f64::NEG_INFINITY, f64::NAN)));
        }
        Ok(Some((q.ln(), -y.norm_squared() / q)))
    }

    /// The unique `τ` with `Q_A(e^{τA}x) = 1`.
    pub fn crossing_time(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector);
        }
        let (f0, d0) = self.log_level(0.0, x)?.ok_or(Error::Overflow("crossing time"))?;
        if f0 == 0.0 {
            return Ok(0.0);
        }
        // t ↦ ln Q strictly decreases; bracket the root by doubling
        let (mut lo, mut hi) = if f0 > 0.0 { (0.0, f64::NAN) } else { (f64::NAN, 0.0) };
        let dir = if f0 > 0.0 { 1.0 } else { -1.0 };
        let mut step = if d0.is_finite() && d0 != 0.0 { (f0 / d0).abs().max(1e-3) } else { 1.0 };
        let mut best = (0.0, f0, d0);
        for _ in 0..2100 {
            if !lo.is_nan() && !hi.is_nan() {
                break;
            }
            let t = dir * step;
            match self.log_level(t, x)? {
                Some((f, d)) if f > 0.0 => {
                    lo = t;
                    best = (t, f, d);
                }
                Some((f, d)) if f < 0.0 => {
                    hi = t;
                    if f.is_finite() {
                        best = (t, f, d);
                    }
                }
                Some((_, _)) => return Ok(t),
                None => lo = t,
            }
            step *= 2.0;
            if !step.is_finite() {
                break;
            }
        }
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::NonConvergence { what: "crossing time bracket", residual: f0 });
        }

        // Newton on ln Q with bisection fallback
        let (mut t, mut f, mut d) = best;
        for _ in 0..MAX_ROOT_ITER {
            let newton = t - f / d;
            let next = if f.is_finite() && d.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let scale = next.abs().max(1.0);
            let small_step = (next - t).abs() <= 2.0 * f64::EPSILON * scale;
            t = next;
            match self.log_level(t, x)? {
                Some((fv, dv)) => {
                    f = fv;
                    d = dv;
                }
                None => {
                    f = f64::INFINITY;
                    d = f64::NAN;
                }
            }
            if f > 0.0 {
                lo = t;
            } else if f < 0.0 {
                hi = t;
            } else {
                break;
            }
            if small_step || hi - lo <= 2.0 * f64::EPSILON * scale || f.abs() <= f64::EPSILON {
                break;
            }
        }
        let level = f.exp() - 1.0;
        // rounding in e^{τA}x relative to its size bounds the attainable level
        let prop = expm(&(&self.a * t))?;
        let u = &prop * x;
        let conditioning = (prop.norm() * x.norm() / u.norm()).max(1.0);
        if !(level.abs() <= LEVEL_TOL * conditioning) {
            return Err(Error::NonConvergence { what: "crossing time", residual: level.abs() });
        }
        Ok(t)
    }

    /// `ζ(x) = e^{-τB} h₀(e^{τA}x)` with `h₀(u) = u / sqrt(Q_B(u))`.
    ///
    /// For `A = B` the two level sets coincide, `h₀` fixes them and the
    /// propagators cancel, so `ζ` is the identity.
    pub fn evaluate_zeta(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        if self.identity {
            return Ok(x.clone());
        }
        if x.norm() <= UNDERFLOW_GUARD {
            return Ok(DVector::zeros(self.dim()));
        }
        let tau = self.crossing_time(x)?;
        let u = expm(&(&self.a * tau))? * x;
        let h = &u / self.form_b.value(&u).sqrt();
        let out = expm(&(&self.b * -tau))? * h;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow("conjugacy evaluation"));
        }
        Ok(out)
    }

    pub fn evaluate_inverse(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.inverse().evaluate_zeta(y)
    }
}

/// A hyperbolic flow on a simply connected nilpotent group.
#[derive(Debug, Clone)]
pub struct HyperbolicSystem {
    pub derivation: Derivation,
    pub decomposition: SpectralDecomposition,
    pub flow: LinearFlow,
    pub group: NilpotentGroup,
}

impl HyperbolicSystem {
    pub fn new(d: &Derivation, tol_realpart: f64) -> Result<Self> {
        let decomposition = spectral_decompose(d, tol_realpart)?;
        if !decomposition.is_hyperbolic() {
            return Err(Error::NotHyperbolic { center_dim: decomposition.zero_basis.ncols() });
        }
        Ok(Self {
            group: NilpotentGroup::new(d.algebra().clone())?,
            flow: LinearFlow::new(d),
            derivation: d.clone(),
            decomposition,
        })
    }

    pub fn signature(&self) -> (usize, usize) {
        let (p, _, m) = self.decomposition.signature();
        (p, m)
    }

    /// `ψ_t(g)`.
    pub fn flow_group(&self, t: f64, g: &GroupElement) -> Result<GroupElement> {
        self.group.flow(&self.flow, t, g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Fault {
    part: Part,
    coord: usize,
}

/// `π(g) = exp(ξ⁺(X⁺)) · exp(ξ⁻(X⁻))` for `g = exp(X⁺) exp(X⁻)`.
///
/// Conjugacies are far from unique. This one depends on the layer bases
/// chosen by the Schur reordering and on the adapted forms.
#[derive(Debug, Clone)]
pub struct GroupConjugacy {
    source: HyperbolicSystem,
    target: HyperbolicSystem,
    xi_plus: Option<EuclideanConjugacy>,
    xi_minus: Option<EuclideanConjugacy>,
    fault: Option<Fault>,
}

/// Builds `π` between two hyperbolic systems with equal `(d⁺, d⁻)`.
pub fn build_group_conjugacy(src: &Derivation, dst: &Derivation, tol_realpart: f64) -> Result<GroupConjugacy> {
    let sd_src = spectral_decompose(src, tol_realpart)?;
    let sd_dst = spectral_decompose(dst, tol_realpart)?;
    for sd in [&sd_src, &sd_dst] {
        if !sd.is_hyperbolic() {
            return Err(Error::NotHyperbolic { center_dim: sd.zero_basis.ncols() });
        }
    }
    let (sp, _, sm) = sd_src.signature();
    let (dp, _, dm) = sd_dst.signature();
    if (sp, sm) != (dp, dm) {
        return Err(Error::SignatureMismatch { src_plus: sp, src_minus: sm, dst_plus: dp, dst_minus: dm });
    }
    let source = HyperbolicSystem::new(src, tol_realpart)?;
    let target = HyperbolicSystem::new(dst, tol_realpart)?;
    GroupConjugacy::from_systems(source, target)
}

impl GroupConjugacy {
    pub fn from_systems(source: HyperbolicSystem, target: HyperbolicSystem) -> Result<Self> {
        let (sp, sm) = source.signature();
        let (dp, dm) = target.signature();
        if (sp, sm) != (dp, dm) {
            return Err(Error::SignatureMismatch { src_plus: sp, src_minus: sm, dst_plus: dp, dst_minus: dm });
        }
        let layer = |part: Part, sign: f64| -> Result<Option<EuclideanConjugacy>> {
            if source.decomposition.basis(part).ncols() == 0 {
                return Ok(None);
            }
            let a = source.decomposition.restriction(part) * sign;
            let b = target.decomposition.restriction(part) * sign;
            Ok(Some(EuclideanConjugacy::new(&a, &b)?))
        };
        let xi_plus = layer(Part::Plus, -1.0)?;
        let xi_minus = layer(Part::Minus, 1.0)?;
        Ok(Self { source, target, xi_plus, xi_minus, fault: None })
    }

    pub fn source(&self) -> &HyperbolicSystem {
        &self.source
    }

    pub fn target(&self) -> &HyperbolicSystem {
        &self.target
    }

    pub fn xi(&self, part: Part) -> Option<&EuclideanConjugacy> {
        match part {
            Part::Plus => self.xi_plus.as_ref(),
            Part::Minus => self.xi_minus.as_ref(),
            Part::Zero => None,
        }
    }

    /// Copy whose layer map flips the sign of one output coordinate.
    #[doc(hidden)]
    pub fn inject_sign_flip(&self, part: Part, coord: usize) -> Result<Self> {
        let dim = self.xi(part).map_or(0, |x| x.dim());
        if coord >= dim {
            return Err(Error::InvalidInput(format!("no coordinate {coord} on the {part:?} layer")));
        }
        Ok(Self { fault: Some(Fault { part, coord }), ..self.clone() })
    }

    /// `B_to ζ(B_fromᵀ X)` for a vector in the `part` layer.
    fn map_layer(
        &self,
        part: Part,
        x: &DVector<f64>,
        from: &SpectralDecomposition,
        to: &SpectralDecomposition,
        forward: bool,
    ) -> Result<DVector<f64>> {
        let Some(xi) = self.xi(part) else {
            return Ok(DVector::zeros(to.dim()));
        };
        let local = from.basis(part).transpose() * x;
        let mut image = if forward {
            xi.evaluate_zeta(&local)?
        } else {
            let mut pre = local;
            if let Some(f) = self.fault.filter(|f| f.part == part) {
                pre[f.coord] = -pre[f.coord];
            }
            xi.evaluate_inverse(&pre)?
        };
        if forward {
            if let Some(f) = self.fault.filter(|f| f.part == part) {
                image[f.coord] = -image[f.coord];
            }
        }
        Ok(to.basis(part) * image)
    }

    pub fn evaluate_pi(&self, g: &GroupElement) -> Result<GroupElement> {
        let (src, dst) = (&self.source, &self.target);
        let (plus, minus) = src.group.split_plus_minus(g, &src.decomposition)?;
        let hp = self.map_layer(Part::Plus, plus.coords(), &src.decomposition, &dst.decomposition, true)?;
        let hm = self.map_layer(Part::Minus, minus.coords(), &src.decomposition, &dst.decomposition, true)?;
        dst.group.multiply(&GroupElement(hp), &GroupElement(hm))
    }

    pub fn evaluate_pi_inverse(&self, h: &GroupElement) -> Result<GroupElement> {
        let (src, dst) = (&self.source, &self.target);
        let (plus, minus) = dst.group.split_plus_minus(h, &dst.decomposition)?;
        let gp = self.map_layer(Part::Plus, plus.coords(), &dst.decomposition, &src.decomposition, false)?;
        let gm = self.map_layer(Part::Minus, minus.coords(), &dst.decomposition, &src.decomposition, false)?;
        src.group.multiply(&GroupElement(gp), &GroupElement(gm))
    }

    /// `gauge(π(φ_t g)⁻¹ · ψ_t(π g))`.
    pub fn conjugacy_residual(&self, g: &GroupElement, t: f64) -> Result<f64> {
        let lhs = self.evaluate_pi(&self.source.flow_group(t, g)?)?;
        let rhs = self.target.flow_group(t, &self.evaluate_pi(g)?)?;
        let diff = self.target.group.multiply(&self.target.group.inverse(&lhs), &rhs)?;
        Ok(gauge(&diff))
    }
}

/// Sampling plan for [`verify_conjugacy`]: coordinates uniform in
/// `[-coord_radius, coord_radius]`, times uniform in `t_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub samples: usize,
    pub t_range: (f64, f64),
    pub tol: f64,
    pub seed: u64,
    pub coord_radius: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { samples: 100, t_range: (-5.0, 5.0), tol: 1e-6, seed: 0, coord_radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstSample {
    pub coords: Vec<f64>,
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub t_range: (f64, f64),
    pub tol: f64,
    pub seed: u64,
    pub max_residual: f64,
    pub median_residual: f64,
    pub worst: Option<WorstSample>,
    pub pass: bool,
}

/// Checks `π ∘ φ_t = ψ_t ∘ π` on seeded random samples.
pub fn verify_conjugacy(gc: &GroupConjugacy, opts: &VerifyOptions) -> Result<VerificationReport> {
    let (a, b) = opts.t_range;
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput("t_range must be a finite interval".into()));
    }
    if !(opts.coord_radius > 0.0) || !(opts.tol >= 0.0) {
        return Err(Error::InvalidInput("coord_radius must be positive and tol nonnegative".into()));
    }
    let n = gc.source.group.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut residuals = Vec::with_capacity(opts.samples);
    let mut worst: Option<WorstSample> = None;
    for _ in 0..opts.samples {
        let coords: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0) * opts.coord_radius).collect();
        let t = if a == b { a } else { rng.random_range(a..=b) };
        let g = GroupElement(DVector::from_vec(coords.clone()));
        let r = match gc.conjugacy_residual(&g, t) {
            Ok(r) => r,
            Err(Error::Overflow(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if worst.as_ref().is_none_or(|w| r > w.residual || r.is_nan()) {
            worst = Some(WorstSample { coords, t, residual: r });
        }
        residuals.push(r);
    }
    let max_residual = residuals.iter().cloned().fold(0.0, |m: f64, r| if r.is_nan() { f64::NAN } else { m.max(r) });
    let median_residual = median(&mut residuals);
    Ok(VerificationReport {
        samples: opts.samples,
        t_range: opts.t_range,
        tol: opts.tol,
        seed: opts.seed,
        max_residual,
        median_residual,
        worst,
        pass: max_residual <= opts.tol,
    })
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::fixtures::heisenberg;
    use crate::spectral::DEFAULT_TOL_REALPART;

    fn scalar(a: f64, b: f64) -> EuclideanConjugacy {
        EuclideanConjugacy::new(&DMatrix::from_element(1, 1, a), &DMatrix::from_element(1, 1, b)).unwrap()
    }

    fn s(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn crossing_time_scalar() {
        let ec = scalar(-1.0, -2.0);
        assert!((ec.crossing_time(&s(2.0)).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(ec.crossing_time(&s(2f64.sqrt())).unwrap().abs() < 1e-15, true);
        let x = 2f64.sqrt() * 5f64.exp();
        assert!((ec.crossing_time(&s(x)).unwrap() - 5.0).abs() < 1e-13);
        assert_eq!(ec.crossing_time(&s(0.0)), Err(Error::ZeroVector));
    }

    #[test]
    fn zeta_scalar_closed_form() {
        let ec = scalar(-1.0, -2.0);
        for x in [0.1, 1.0, 2.0, 10.0, -0.1, -1.0, -2.0, -10.0] {
            let z = ec.evaluate_zeta(&s(x)).unwrap()[0];
            assert!((z - x.signum() * x * x).abs() <= 1e-10, "x = {x}: {z}");
        }
        assert_eq!(ec.evaluate_zeta(&s(0.0)).unwrap()[0], 0.0);
    }

    #[test]
    fn zeta_identity_when_flows_agree() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        let ec = EuclideanConjugacy::new(&a, &a).unwrap();
        let x = DVector::from_vec(vec![0.3, -4.0]);
        assert!((ec.evaluate_zeta(&x).unwrap() - &x).norm() < 1e-12);
    }

    #[test]
    fn zeta_inverse_round_trip() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.5, -0.5]);
        let ec = EuclideanConjugacy::new(&a, &b).unwrap();
        for x in [[1.0, 0.0], [-0.2, 3.0], [1e-6, -1e-7], [50.0, 20.0]] {
            let x = DVector::from_row_slice(&x);
            let back = ec.evaluate_inverse(&ec.evaluate_zeta(&x).unwrap()).unwrap();
            assert!((&back - &x).norm() <= 1e-10 * (1.0 + x.norm()));
        }
    }

    fn heis(d: &[f64]) -> Derivation {
        Derivation::diagonal(d, heisenberg()).unwrap()
    }

    #[test]
    fn signature_mismatch_is_reported() {
        let err = build_group_conjugacy(&heis(&[1.0, -2.0, -1.0]), &heis(&[3.0, -1.0, 2.0]), DEFAULT_TOL_REALPART)
            .unwrap_err();
        assert_eq!(err, Error::SignatureMismatch { src_plus: 1, src_minus: 2, dst_plus: 2, dst_minus: 1 });
        assert_eq!(err.kind(), "DimensionMismatch");
    }

    #[test]
    fn non_hyperbolic_is_rejected() {
        let err = build_group_conjugacy(&heis(&[1.0, -1.0, 0.0]), &heis(&[1.0, -2.0, -1.0]), DEFAULT_TOL_REALPART)
            .unwrap_err();
        assert_eq!(err, Error::NotHyperbolic { center_dim: 1 });
    }

    #[test]
    fn pi_fixes_identity_and_inverts() {
        let gc = build_group_conjugacy(&heis(&[1.0, -2.0, -1.0]), &heis(&[2.0, -3.0, -1.0]), DEFAULT_TOL_REALPART)
            .unwrap();
        let e = gc.source().group.identity();
        assert_eq!(gc.evaluate_pi(&e).unwrap(), gc.target().group.identity());
        let g = GroupElement(DVector::from_vec(vec![0.4, -0.7, 0.9]));
        let back = gc.evaluate_pi_inverse(&gc.evaluate_pi(&g).unwrap()).unwrap();
        assert!((back.coords() - g.coords()).norm() < 1e-10);
    }

    #[test]
    fn identical_systems_verify_tightly() {
        let d = heis(&[1.0, -2.0, -1.0]);
        let gc = build_group_conjugacy(&d, &d, DEFAULT_TOL_REALPART).unwrap();
        let opts = VerifyOptions { tol: 1e-10, seed: 7, ..Default::default() };
        let rep = verify_conjugacy(&gc, &opts).unwrap();
        assert!(rep.pass, "max residual {}", rep.max_residual);
    }

    #[test]
    fn same_seed_same_report() {
        let gc = build_group_conjugacy(&heis(&[1.0, -2.0, -1.0]), &heis(&[2.0, -3.0, -1.0]), DEFAULT_TOL_REALPART)
            .unwrap();
        let opts = VerifyOptions { samples: 20, seed: 3, ..Default::default() };
        assert_eq!(verify_conjugacy(&gc, &opts).unwrap(), verify_conjugacy(&gc, &opts).unwrap());
    }

    #[test]
    fn sign_flip_breaks_rotating_target() {
        let target = Derivation::new(
            &DMatrix::from_row_slice(3, 3, &[-1.0, -1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -2.0]),
            heisenberg(),
        )
        .unwrap();
        let gc = build_group_conjugacy(&heis(&[-1.0, -2.0, -3.0]), &target, DEFAULT_TOL_REALPART).unwrap();
        let opts = VerifyOptions { samples: 50, seed: 11, ..Default::default() };
        assert!(verify_conjugacy(&gc, &opts).unwrap().pass);
        let broken = gc.inject_sign_flip(Part::Minus, 0).unwrap();
        let rep = verify_conjugacy(&broken, &opts).unwrap();
        assert!(!rep.pass);
        assert!(rep.max_residual > 1e3 * opts.tol);
    }
}
