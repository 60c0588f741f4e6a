//! Simply connected nilpotent Lie groups in exponential coordinates.
//!
//! A point `exp(X)` is stored as its coordinate vector `X`. The product is
//! the Baker–Campbell–Hausdorff series, which is a finite polynomial on a
//! nilpotent algebra, so multiplication is exact up to rounding.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::LinearFlow;
use crate::lie::{AlgebraVector, LieAlgebra, DEFAULT_RANK_TOL};
use crate::spectral::SpectralDecomposition;

/// Deepest nilpotency step the BCH table supports.
pub const MAX_BCH_DEPTH: usize = 6;

/// A point of the group in exponential coordinates of the first kind.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement(pub AlgebraVector);

impl GroupElement {
    pub fn coords(&self) -> &AlgebraVector {
        &self.0
    }

    pub fn into_coords(self) -> AlgebraVector {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Euclidean norm of the exponential coordinates.
///
/// `exp` is a global diffeomorphism here, so `gauge(g_n) → 0` exactly when
/// `g_n → e`.
pub fn gauge(g: &GroupElement) -> f64 {
    crate::linalg::scaled_norm(&g.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Letter {
    X,
    Y,
}

/// BCH series truncated at a fixed bracket depth.
///
/// Terms are right-nested brackets `[w_1, [w_2, … [w_{m-1}, w_m]]]` of words
/// in `X`, `Y`, with Dynkin's coefficients collected per word. Words are
/// evaluated through a table of shared suffixes.
#[derive(Debug, Clone)]
pub struct BchTable {
    depth: usize,
    // suffix i = (first letter, index of the remaining suffix or None)
    suffixes: Vec<(Letter, Option<usize>)>,
    terms: Vec<(usize, f64)>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl BchTable {
    pub fn new(depth: usize) -> Result<Self> {
        if depth > MAX_BCH_DEPTH {
            return Err(Error::StepTooLarge { step: depth, max: MAX_BCH_DEPTH });
        }
        let depth = depth.max(1);
        let mut words: BTreeMap<Vec<Letter>, f64> = BTreeMap::new();
        // Dynkin: sum over n and pairs (r_i, s_i) with r_i + s_i ≥ 1
        fn expand(
            depth: usize,
            n_target: usize,
            pairs: &mut Vec<(usize, usize)>,
            used: usize,
            words: &mut BTreeMap<Vec<Letter>, f64>,
        ) {
            if pairs.len() == n_target {
                let n = n_target as f64;
                let sign = if n_target % 2 == 1 { 1.0 } else { -1.0 };
                let denom: f64 = pairs.iter().map(|&(r, s)| factorial(r) * factorial(s)).product();
                let coeff = sign / (n * used as f64 * denom);
                let mut word = Vec::with_capacity(used);
                for &(r, s) in pairs.iter() {
                    word.extend(std::iter::repeat(Letter::X).take(r));
                    word.extend(std::iter::repeat(Letter::Y).take(s));
                }
                *words.entry(word).or_insert(0.0) += coeff;
                return;
            }
            for r in 0..=(depth - used) {
                for s in 0..=(depth - used - r) {
                    if r + s == 0 {
                        continue;
                    }
                    pairs.push((r, s));
                    expand(depth, n_target, pairs, used + r + s, words);
                    pairs.pop();
                }
            }
        }
        for n in 1..=depth {
            expand(depth, n, &mut Vec::new(), 0, &mut words);
        }

        let mut suffix_index: BTreeMap<Vec<Letter>, usize> = BTreeMap::new();
        let mut suffixes = Vec::new();
        let mut terms = Vec::new();
        let mut ordered: Vec<(Vec<Letter>, f64)> = words
            .into_iter()
            .filter(|(w, c)| {
                let m = w.len();
                *c != 0.0 && (m == 1 || w[m - 1] != w[m - 2])
            })
            .collect();
        ordered.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then(a.0.cmp(&b.0)));
        for (word, coeff) in ordered {
            let idx = intern_suffix(&word, &mut suffix_index, &mut suffixes);
            terms.push((idx, coeff));
        }
        Ok(Self { depth, suffixes, terms })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// `Z` with `exp(Z) = exp(X) exp(Y)`, exact when the algebra has step ≤ depth.
    pub fn evaluate(&self, alg: &LieAlgebra, x: &AlgebraVector, y: &AlgebraVector) -> AlgebraVector {
        let mut values: Vec<AlgebraVector> = Vec::with_capacity(self.suffixes.len());
        for &(letter, rest) in &self.suffixes {
            let head = match letter {
                Letter::X => x,
                Letter::Y => y,
            };
            let v = match rest {
                None => head.clone(),
                Some(r) => alg.bracket_unchecked(head, &values[r]),
            };
            values.push(v);
        }
        let mut z = AlgebraVector::zeros(x.len());
        for &(idx, coeff) in &self.terms {
            z.axpy(coeff, &values[idx], 1.0);
        }
        z
    }
}

fn intern_suffix(
    word: &[Letter],
    index: &mut BTreeMap<Vec<Letter>, usize>,
    suffixes: &mut Vec<(Letter, Option<usize>)>,
) -> usize {
    if let Some(&i) = index.get(word) {
        return i;
    }
    let rest = if word.len() > 1 {
        Some(intern_suffix(&word[1..], index, suffixes))
    } else {
        None
    };
    suffixes.push((word[0], rest));
    let i = suffixes.len() - 1;
    index.insert(word.to_vec(), i);
    i
}

/// The simply connected group of a nilpotent algebra.
#[derive(Debug, Clone)]
pub struct NilpotentGroup {
    algebra: Arc<LieAlgebra>,
    step: usize,
    table: BchTable,
}

/// Outcome of following an orbit toward the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    StablePoint,
    UnstableComponent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorReport {
    pub classification: Classification,
    /// `(t, gauge(φ_t(g)))` on the sampling grid; `inf` after overflow.
    pub gauge_curve: Vec<(f64, f64)>,
    /// Gauge of the component the orbit should shed (`g⁺` forward, `g⁻` backward).
    pub escaping_component_gauge: f64,
    pub initial_gauge: f64,
    pub final_gauge: f64,
}

const ORBIT_GRID: usize = 41;

impl NilpotentGroup {
    pub fn new(alg: impl Into<Arc<LieAlgebra>>) -> Result<Self> {
        let algebra = alg.into();
        let step = algebra
            .lower_central_series(DEFAULT_RANK_TOL)
            .step
            .ok_or(Error::NotNilpotent)?;
        let table = BchTable::new(step)?;
        Ok(Self { algebra, step, table })
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.algebra
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(AlgebraVector::zeros(self.dim()))
    }

    pub fn element(&self, coords: AlgebraVector) -> Result<GroupElement> {
        self.check(&coords)?;
        Ok(GroupElement(coords))
    }

    fn check(&self, v: &AlgebraVector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        Ok(())
    }

    pub fn bch(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.table.evaluate(&self.algebra, x, y))
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        Ok(GroupElement(self.bch(&g.0, &h.0)?))
    }

    pub fn inverse(&self, g: &GroupElement) -> GroupElement {
        GroupElement(-&g.0)
    }

    /// `φ_t(exp X) = exp(e^{tD} X)`.
    pub fn flow(&self, lf: &LinearFlow, t: f64, g: &GroupElement) -> Result<GroupElement> {
        self.check(&g.0)?;
        Ok(GroupElement(lf.apply(t, &g.0)?))
    }

    /// Writes `g = g⁺ g⁻` with `g± ∈ G±` for a hyperbolic decomposition.
    pub fn split_plus_minus(
        &self,
        g: &GroupElement,
        sd: &SpectralDecomposition,
    ) -> Result<(GroupElement, GroupElement)> {
        self.check(&g.0)?;
        if sd.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: sd.dim() });
        }
        if !sd.is_hyperbolic() {
            return Err(Error::NotHyperbolic { center_dim: sd.zero_basis.ncols() });
        }
        let x = &g.0;
        let mut plus = &sd.p_plus * x;
        let mut minus = &sd.p_minus * x;
        // exact after `step` rounds; the extra rounds only polish roundoff
        for _ in 0..self.step + 2 {
            let z = self.table.evaluate(&self.algebra, &plus, &minus);
            let target = x - (&z - &plus - &minus);
            let next_plus = &sd.p_plus * &target;
            let next_minus = &sd.p_minus * &target;
            let change = (&next_plus - &plus).norm() + (&next_minus - &minus).norm();
            plus = next_plus;
            minus = next_minus;
            if change == 0.0 {
                break;
            }
        }
        let residual = (self.table.evaluate(&self.algebra, &plus, &minus) - x).norm();
        if residual <= self.split_tolerance(&plus, &minus) {
            return Ok((GroupElement(plus), GroupElement(minus)));
        }
        Err(Error::NonConvergence { what: "G+ G- splitting", residual })
    }

    fn split_tolerance(&self, plus: &AlgebraVector, minus: &AlgebraVector) -> f64 {
        let size = 1.0 + plus.norm() + minus.norm();
        1e-13 * size.powi(self.step as i32)
    }

    /// Follows `φ_t(g)` forward and cross-checks with the splitter: `g ∈ G⁻`
    /// exactly when the orbit converges to the identity.
    pub fn attractor_test(
        &self,
        lf: &LinearFlow,
        sd: &SpectralDecomposition,
        g: &GroupElement,
        t_max: f64,
        tol: f64,
    ) -> Result<AttractorReport> {
        let (plus, _) = self.split_plus_minus(g, sd)?;
        self.follow_orbit(lf, g, gauge(&plus), t_max, tol)
    }

    /// Time-reversed counterpart: `g ∈ G⁺` exactly when `φ_{-t}(g) → e`.
    pub fn repeller_test(
        &self,
        lf: &LinearFlow,
        sd: &SpectralDecomposition,
        g: &GroupElement,
        t_max: f64,
        tol: f64,
    ) -> Result<AttractorReport> {
        let (_, minus) = self.split_plus_minus(g, sd)?;
        self.follow_orbit(&lf.reversed(), g, gauge(&minus), t_max, tol)
    }

    fn follow_orbit(
        &self,
        lf: &LinearFlow,
        g: &GroupElement,
        escaping: f64,
        t_max: f64,
        tol: f64,
    ) -> Result<AttractorReport> {
        if !(t_max > 0.0) || !(tol > 0.0) {
            return Err(Error::InvalidInput("t_max and tol must be positive".into()));
        }
        let initial = gauge(g);
        let mut curve = Vec::with_capacity(ORBIT_GRID);
        for i in 0..ORBIT_GRID {
            let t = t_max * i as f64 / (ORBIT_GRID - 1) as f64;
            let value = match self.flow(lf, t, g) {
                Ok(h) => gauge(&h),
                Err(Error::Overflow(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            curve.push((t, value));
        }
        let final_gauge = curve.last().map_or(initial, |p| p.1);
        let classification = if escaping <= tol {
            if final_gauge <= tol {
                Classification::StablePoint
            } else {
                Classification::Inconclusive
            }
        } else if final_gauge > initial {
            Classification::UnstableComponent
        } else {
            Classification::Inconclusive
        };
        Ok(AttractorReport {
            classification,
            gauge_curve: curve,
            escaping_component_gauge: escaping,
            initial_gauge: initial,
            final_gauge,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::fixtures::*;
    use crate::spectral::{spectral_decompose, Derivation, DEFAULT_TOL_REALPART};
    use nalgebra::DVector;

    fn v(x: &[f64]) -> AlgebraVector {
        DVector::from_column_slice(x)
    }

    #[test]
    fn low_order_coefficients() {
        // X + Y + 1/2 [X,Y] + 1/12 [X,[X,Y]] - 1/12 [Y,[X,Y]]
        let t = BchTable::new(3).unwrap();
        let mut got: Vec<(String, f64)> = Vec::new();
        let mut names = Vec::new();
        for (i, &(letter, rest)) in t.suffixes.iter().enumerate() {
            let head = if letter == Letter::X { "X" } else { "Y" };
            let name = match rest {
                None => head.to_string(),
                Some(r) => format!("[{head},{}]", names[r]),
            };
            let _ = i;
            names.push(name);
        }
        for &(idx, c) in &t.terms {
            got.push((names[idx].clone(), c));
        }
        let find = |n: &str| got.iter().find(|(m, _)| m == n).map(|p| p.1).unwrap_or(0.0);
        assert!((find("X") - 1.0).abs() < 1e-15);
        assert!((find("Y") - 1.0).abs() < 1e-15);
        assert!((find("[X,Y]") - find("[Y,X]") - 0.5).abs() < 1e-15);
    }

    #[test]
    fn heisenberg_product() {
        let g = NilpotentGroup::new(heisenberg()).unwrap();
        let z = g.bch(&v(&[1.0, 0.0, 0.0]), &v(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(z, v(&[1.0, 1.0, 0.5]));
    }

    #[test]
    fn identity_and_abelian() {
        let g = NilpotentGroup::new(filiform4()).unwrap();
        let x = v(&[0.3, -1.0, 2.0, 0.5]);
        assert_eq!(g.bch(&x, &DVector::zeros(4)).unwrap(), x);
        let a = NilpotentGroup::new(LieAlgebra::abelian(3).unwrap()).unwrap();
        let (x, y) = (v(&[1.0, 2.0, 3.0]), v(&[-0.5, 0.25, 4.0]));
        assert_eq!(a.bch(&x, &y).unwrap(), &x + &y);
    }

    #[test]
    fn inverse_and_commutator() {
        let g = NilpotentGroup::new(heisenberg()).unwrap();
        let a = g.element(v(&[1.0, 0.0, 0.0])).unwrap();
        let b = g.element(v(&[0.0, 1.0, 0.0])).unwrap();
        let ab = g.multiply(&a, &b).unwrap();
        let ba = g.multiply(&b, &a).unwrap();
        assert_ne!(ab, ba);
        let comm = g.multiply(&ab, &g.inverse(&ba)).unwrap();
        assert_eq!(comm.0, v(&[0.0, 0.0, 1.0]));
        assert_eq!(g.multiply(&ab, &g.inverse(&ab)).unwrap(), g.identity());
    }

    #[test]
    fn rejects_non_nilpotent_and_deep_algebras() {
        assert_eq!(NilpotentGroup::new(sl2()).unwrap_err(), Error::NotNilpotent);
        assert_eq!(
            NilpotentGroup::new(filiform(8)).unwrap_err(),
            Error::StepTooLarge { step: 7, max: MAX_BCH_DEPTH }
        );
        assert_eq!(NilpotentGroup::new(filiform(7)).unwrap().step(), 6);
    }

    fn heisenberg_setup() -> (NilpotentGroup, LinearFlow, SpectralDecomposition) {
        let d = Derivation::diagonal(&[1.0, -2.0, -1.0], heisenberg()).unwrap();
        let sd = spectral_decompose(&d, DEFAULT_TOL_REALPART).unwrap();
        (NilpotentGroup::new(heisenberg()).unwrap(), LinearFlow::new(&d), sd)
    }

    #[test]
    fn group_flow_examples() {
        let (g, lf, _) = heisenberg_setup();
        let x = g.element(v(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(g.flow(&lf, 0.0, &x).unwrap(), x);
        let y = g.flow(&lf, 1.0, &x).unwrap();
        assert!((y.0[1] - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn split_closed_form() {
        let (g, _, sd) = heisenberg_setup();
        let x = g.element(v(&[1.0, 1.0, 0.0])).unwrap();
        let (p, m) = g.split_plus_minus(&x, &sd).unwrap();
        assert!((&p.0 - v(&[1.0, 0.0, 0.0])).amax() < 1e-15);
        assert!((&m.0 - v(&[0.0, 1.0, -0.5])).amax() < 1e-15);
    }

    #[test]
    fn split_trivial_cases() {
        let (g, _, sd) = heisenberg_setup();
        let (p, m) = g.split_plus_minus(&g.identity(), &sd).unwrap();
        assert_eq!((p, m), (g.identity(), g.identity()));
        let x = g.element(v(&[0.0, 0.7, -0.2])).unwrap();
        let (p, m) = g.split_plus_minus(&x, &sd).unwrap();
        assert_eq!(p, g.identity());
        assert_eq!(m, x);
    }

    #[test]
    fn split_requires_hyperbolic() {
        let d = Derivation::diagonal(&[1.0, -1.0, 0.0], heisenberg()).unwrap();
        let sd = spectral_decompose(&d, DEFAULT_TOL_REALPART).unwrap();
        let g = NilpotentGroup::new(heisenberg()).unwrap();
        assert_eq!(
            g.split_plus_minus(&g.identity(), &sd).unwrap_err(),
            Error::NotHyperbolic { center_dim: 1 }
        );
    }

    #[test]
    fn gauge_examples() {
        let (g, lf, _) = heisenberg_setup();
        assert_eq!(gauge(&g.identity()), 0.0);
        assert_eq!(gauge(&g.element(v(&[0.0, 1.0, 0.0])).unwrap()), 1.0);
        let x = g.element(v(&[0.0, 1.0, 1.0])).unwrap();
        for t in [0.5f64, 2.0, 10.0] {
            let want = ((-4.0 * t).exp() + (-2.0 * t).exp()).sqrt();
            let got = gauge(&g.flow(&lf, t, &x).unwrap());
            assert!((got - want).abs() <= 1e-14 * want);
        }
    }

    #[test]
    fn attractor_examples() {
        let (g, lf, sd) = heisenberg_setup();
        let stable = g.element(v(&[0.0, 1.0, -0.5])).unwrap();
        let rep = g.attractor_test(&lf, &sd, &stable, 40.0, 1e-8).unwrap();
        assert_eq!(rep.classification, Classification::StablePoint);
        let unstable = g.element(v(&[1.0, 0.0, 0.0])).unwrap();
        let rep = g.attractor_test(&lf, &sd, &unstable, 40.0, 1e-8).unwrap();
        assert_eq!(rep.classification, Classification::UnstableComponent);
        let rep = g.attractor_test(&lf, &sd, &g.identity(), 40.0, 1e-8).unwrap();
        assert_eq!(rep.classification, Classification::StablePoint);
    }

    #[test]
    fn repeller_examples() {
        let (g, lf, sd) = heisenberg_setup();
        let unstable = g.element(v(&[1.0, 0.0, 0.0])).unwrap();
        let rep = g.repeller_test(&lf, &sd, &unstable, 40.0, 1e-8).unwrap();
        assert_eq!(rep.classification, Classification::StablePoint);
        let stable = g.element(v(&[0.0, 1.0, 0.0])).unwrap();
        let rep = g.repeller_test(&lf, &sd, &stable, 40.0, 1e-8).unwrap();
        assert_eq!(rep.classification, Classification::UnstableComponent);
    }
}
