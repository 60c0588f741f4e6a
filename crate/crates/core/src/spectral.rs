//! Derivations and the stable/center/unstable splitting of the algebra.
//!
//! The splitting is computed from an ordered real Schur form. Diagonal blocks
//! are grouped into layers by the real part of their eigenvalues and sorted
//! in descending order, so the unstable part comes first and the stable part
//! last. The block-triangular form is then decoupled by solving one Sylvester
//! equation per layer, which yields a basis adapted to the layers and the
//! spectral projections without inverting an eigenvector matrix.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, LieAlgebra};
use crate::linalg::{self, RealSchur};

pub const DEFAULT_LEIBNIZ_TOL: f64 = 1e-9;
pub const DEFAULT_TOL_REALPART: f64 = 1e-8;
pub const DEFAULT_GRADING_TOL: f64 = 1e-10;
pub const DEFAULT_SEMISIMPLE_TOL: f64 = 1e-6;

/// A linear map on a Lie algebra satisfying `D[X,Y] = [DX,Y] + [X,DY]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    matrix: DMatrix<f64>,
    algebra: Arc<LieAlgebra>,
}

/// Worst Leibniz defect over basis pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeibnizResidual {
    pub i: usize,
    pub j: usize,
    pub residual: f64,
}

/// Euclidean norm of `D[e_i,e_j] - [De_i,e_j] - [e_i,De_j]`, maximized over pairs.
pub fn leibniz_residual(matrix: &DMatrix<f64>, alg: &LieAlgebra) -> Result<LeibnizResidual> {
    let n = alg.dim();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows().max(matrix.ncols()) });
    }
    let images: Vec<AlgebraVector> = (0..n).map(|i| matrix.column(i).clone_owned()).collect();
    let mut worst = LeibnizResidual { i: 0, j: 0, residual: 0.0 };
    for i in 0..n {
        let ei = alg.basis_vector(i);
        for j in 0..n {
            let ej = alg.basis_vector(j);
            let lhs = matrix * alg.bracket_unchecked(&ei, &ej);
            let rhs = alg.bracket_unchecked(&images[i], &ej) + alg.bracket_unchecked(&ei, &images[j]);
            let r = (lhs - rhs).norm();
            if r > worst.residual {
                worst = LeibnizResidual { i, j, residual: r };
            }
        }
    }
    Ok(worst)
}

/// Returns a [`Derivation`] when the Leibniz defect is within `tol`.
pub fn validate_leibniz(matrix: &DMatrix<f64>, alg: impl Into<Arc<LieAlgebra>>, tol: f64) -> Result<Derivation> {
    let alg = alg.into();
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("derivation has non-finite entries".into()));
    }
    let worst = leibniz_residual(matrix, &alg)?;
    if worst.residual > tol {
        return Err(Error::LeibnizViolation { i: worst.i, j: worst.j, residual: worst.residual });
    }
    Ok(Derivation { matrix: matrix.clone(), algebra: alg })
}

impl Derivation {
    pub fn new(matrix: &DMatrix<f64>, alg: impl Into<Arc<LieAlgebra>>) -> Result<Self> {
        validate_leibniz(matrix, alg, DEFAULT_LEIBNIZ_TOL)
    }

    /// Diagonal derivation; still checked against the Leibniz rule.
    pub fn diagonal(entries: &[f64], alg: impl Into<Arc<LieAlgebra>>) -> Result<Self> {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(entries));
        Self::new(&m, alg)
    }

    /// The inner derivation `ad_x`.
    pub fn inner(x: &AlgebraVector, alg: impl Into<Arc<LieAlgebra>>) -> Result<Self> {
        let alg = alg.into();
        let m = alg.ad(x)?;
        Self::new(&m, alg)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn algebra(&self) -> &Arc<LieAlgebra> {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

/// Sum of the generalized eigenspaces whose eigenvalues share one real part.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub real_part: f64,
    /// Orthonormal basis of the layer.
    pub basis: DMatrix<f64>,
    /// Projection onto the layer along all other layers.
    pub projection: DMatrix<f64>,
}

impl Layer {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<Eigenvalue>,
    /// Layers in descending order of real part.
    pub layers: Vec<Layer>,
    pub plus_basis: DMatrix<f64>,
    pub zero_basis: DMatrix<f64>,
    pub minus_basis: DMatrix<f64>,
    pub p_plus: DMatrix<f64>,
    pub p_zero: DMatrix<f64>,
    pub p_minus: DMatrix<f64>,
    pub tol_realpart: f64,
    /// The decomposed matrix.
    pub matrix: DMatrix<f64>,
}

/// Which part of the splitting a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Plus,
    Zero,
    Minus,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(d⁺, d⁰, d⁻)`.
    pub fn signature(&self) -> (usize, usize, usize) {
        (self.plus_basis.ncols(), self.zero_basis.ncols(), self.minus_basis.ncols())
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.zero_basis.ncols() == 0
    }

    pub fn basis(&self, part: Part) -> &DMatrix<f64> {
        match part {
            Part::Plus => &self.plus_basis,
            Part::Zero => &self.zero_basis,
            Part::Minus => &self.minus_basis,
        }
    }

    pub fn projection(&self, part: Part) -> &DMatrix<f64> {
        match part {
            Part::Plus => &self.p_plus,
            Part::Zero => &self.p_zero,
            Part::Minus => &self.p_minus,
        }
    }

    /// Matrix of the restriction to a part, in that part's orthonormal basis.
    pub fn restriction(&self, part: Part) -> DMatrix<f64> {
        let b = self.basis(part);
        b.transpose() * &self.matrix * b
    }

    /// Components of `v` in each layer, in layer order.
    pub fn layer_components(&self, v: &AlgebraVector) -> Vec<AlgebraVector> {
        self.layers.iter().map(|l| &l.projection * v).collect()
    }

    /// Spectral abscissa (largest real part over all eigenvalues).
    pub fn abscissa(&self) -> f64 {
        self.layers.first().map_or(f64::NEG_INFINITY, |l| l.real_part)
    }
}

/// Computes the layer decomposition of a validated derivation.
pub fn spectral_decompose(d: &Derivation, tol_realpart: f64) -> Result<SpectralDecomposition> {
    decompose_matrix(d.matrix(), tol_realpart)
}

/// Layer decomposition of an arbitrary real square matrix.
pub fn decompose_matrix(m: &DMatrix<f64>, tol_realpart: f64) -> Result<SpectralDecomposition> {
    if !(tol_realpart > 0.0) {
        return Err(Error::InvalidInput("tol_realpart must be positive".into()));
    }
    let n = m.nrows();
    let mut schur = RealSchur::new(m)?;
    let blocks = schur.blocks();
    let block_res = merge_defective(&schur.t, &blocks);
    let layer_res = cluster_real_parts(&block_res, tol_realpart)?;
    let layer_of = |re: f64| -> usize {
        let mut best = 0;
        for (i, &l) in layer_res.iter().enumerate() {
            if (re - l).abs() < (re - layer_res[best]).abs() {
                best = i;
            }
        }
        best
    };
    schur.reorder_by(|b| layer_of(b.re))?;

    let blocks = schur.blocks();
    let mut ranges: Vec<(usize, usize)> = vec![(0, 0); layer_res.len()];
    let mut seen = vec![false; layer_res.len()];
    for b in &blocks {
        let l = layer_of(b.re);
        if !seen[l] {
            ranges[l] = (b.start, 0);
            seen[l] = true;
        }
        ranges[l].1 += b.size;
    }
    debug_assert!(ranges.windows(2).all(|w| w[0].0 + w[0].1 == w[1].0));

    // decouple each layer from everything after it
    let mut t = schur.t.clone();
    let mut y = DMatrix::<f64>::identity(n, n);
    let mut yinv = DMatrix::<f64>::identity(n, n);
    for &(s0, len) in ranges.iter().take(ranges.len().saturating_sub(1)) {
        let r0 = s0 + len;
        let rlen = n - r0;
        let a = t.view((s0, s0), (len, len)).clone_owned();
        let b = t.view((r0, r0), (rlen, rlen)).clone_owned();
        let c = t.view((s0, r0), (len, rlen)).clone_owned();
        let x = linalg::solve_sylvester_quasi_triangular(&a, &(-&b), &(-&c))?;
        t.view_mut((s0, r0), (len, rlen)).fill(0.0);
        let upd = y.view((0, s0), (n, len)) * &x;
        let mut tail = y.view_mut((0, r0), (n, rlen));
        tail += upd;
        let upd = &x * yinv.view((r0, 0), (rlen, n));
        let mut head = yinv.view_mut((s0, 0), (len, n));
        head -= upd;
    }
    let s = &schur.q * y;
    let sinv = yinv * schur.q.transpose();

    let mut layers = Vec::with_capacity(layer_res.len());
    for (l, &(s0, len)) in ranges.iter().enumerate() {
        let cols = s.view((0, s0), (n, len)).clone_owned();
        let projection = &cols * sinv.view((s0, 0), (len, n));
        layers.push(Layer {
            real_part: layer_res[l],
            basis: linalg::orthonormalize(&cols),
            projection,
        });
    }

    let part_of = |re: f64| {
        if re > 0.0 {
            Part::Plus
        } else if re < 0.0 {
            Part::Minus
        } else {
            Part::Zero
        }
    };
    let mut part_cols: [Vec<usize>; 3] = Default::default();
    let mut part_proj = [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    for (layer, &(s0, len)) in layers.iter().zip(&ranges) {
        let idx = part_of(layer.real_part) as usize;
        part_cols[idx].extend(s0..s0 + len);
        part_proj[idx] += &layer.projection;
    }
    let part_basis = |idx: usize| -> DMatrix<f64> {
        let cols = &part_cols[idx];
        let mut m = DMatrix::zeros(n, cols.len());
        for (c, &j) in cols.iter().enumerate() {
            m.set_column(c, &s.column(j));
        }
        linalg::orthonormalize(&m)
    };
    let [p_plus, p_zero, p_minus] = part_proj;

    Ok(SpectralDecomposition {
        eigenvalues: collect_eigenvalues(&schur, tol_realpart),
        plus_basis: part_basis(Part::Plus as usize),
        zero_basis: part_basis(Part::Zero as usize),
        minus_basis: part_basis(Part::Minus as usize),
        layers,
        p_plus,
        p_zero,
        p_minus,
        tol_realpart,
        matrix: m.clone(),
    })
}

/// Real parts of the Schur blocks, with roundoff splitting undone.
///
/// A defective eigenvalue with coupling `x` in the Schur form splits into
/// values about `sqrt(ε |T| x)` apart. Pairs closer than that cannot be told
/// apart in floating point and are replaced by their mean.
fn merge_defective(t: &DMatrix<f64>, blocks: &[linalg::QuasiBlock]) -> Vec<f64> {
    let scale = t.norm();
    let mut group: Vec<usize> = (0..blocks.len()).collect();
    fn root(g: &mut [usize], mut i: usize) -> usize {
        while g[i] != i {
            g[i] = g[g[i]];
            i = g[i];
        }
        i
    }
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            let (bi, bj) = (&blocks[i], &blocks[j]);
            let gap = (bi.re - bj.re).abs();
            let rows = bi.start..bi.start + bi.size;
            let cols = bj.start..bj.start + bj.size;
            let coupling = t.view((rows.start, cols.start), (rows.len(), cols.len())).norm();
            if gap * gap <= 8.0 * f64::EPSILON * scale * coupling {
                let (a, b) = (root(&mut group, i), root(&mut group, j));
                group[b] = a;
            }
        }
    }
    let mut sum = vec![(0.0, 0usize); blocks.len()];
    for (i, b) in blocks.iter().enumerate() {
        let r = root(&mut group, i);
        sum[r].0 += b.re * b.size as f64;
        sum[r].1 += b.size;
    }
    (0..blocks.len())
        .map(|i| {
            let r = root(&mut group, i);
            sum[r].0 / sum[r].1 as f64
        })
        .collect()
}

/// Groups real parts into layers (descending). Values within `tol` of zero
/// form the center layer, pinned at exactly zero.
fn cluster_real_parts(values: &[f64], tol: f64) -> Result<Vec<f64>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &v in &sorted {
        if v.abs() > tol && v.abs() <= 2.0 * tol {
            return Err(Error::ClusterAmbiguity { left: 0.0, right: v });
        }
    }
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for &v in &sorted {
        match clusters.last_mut() {
            Some(c) if v - c.last().unwrap() <= tol => c.push(v),
            Some(c) => {
                let last = *c.last().unwrap();
                if v - last <= 2.0 * tol {
                    return Err(Error::ClusterAmbiguity { left: last, right: v });
                }
                clusters.push(vec![v]);
            }
            None => clusters.push(vec![v]),
        }
    }
    let mut out = Vec::with_capacity(clusters.len());
    for c in &clusters {
        let (lo, hi) = (c[0], *c.last().unwrap());
        if hi - lo > 2.0 * tol {
            return Err(Error::ClusterAmbiguity { left: lo, right: hi });
        }
        if c.iter().any(|v| v.abs() <= tol) {
            out.push(0.0);
        } else {
            out.push(c.iter().sum::<f64>() / c.len() as f64);
        }
    }
    out.reverse();
    Ok(out)
}

fn collect_eigenvalues(schur: &RealSchur, tol: f64) -> Vec<Eigenvalue> {
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for b in schur.blocks() {
        if b.size == 1 {
            raw.push((b.re, 0.0));
        } else {
            raw.push((b.re, b.im));
            raw.push((b.re, -b.im));
        }
    }
    raw.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.partial_cmp(&a.1).unwrap()));
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for (re, im) in raw {
        if let Some(e) = out.iter_mut().find(|e| (e.0 - re).hypot(e.1 - im) <= tol.max(1e-7)) {
            let k = e.2 as f64;
            e.0 = (e.0 * k + re) / (k + 1.0);
            e.1 = (e.1 * k + im) / (k + 1.0);
            e.2 += 1;
        } else {
            out.push((re, im, 1));
        }
    }
    out.into_iter()
        .map(|(re, im, multiplicity)| Eigenvalue { re, im, multiplicity })
        .collect()
}

/// Trichotomy test: no eigenvalue on the imaginary axis.
pub fn is_hyperbolic(sd: &SpectralDecomposition) -> bool {
    sd.is_hyperbolic()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradingPair {
    pub alpha: f64,
    pub beta: f64,
    /// Layer real part the bracket should land in, when one exists.
    pub target: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradingReport {
    pub pairs: Vec<GradingPair>,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks `[g_α, g_β] ⊂ g_{α+β}` for every pair of layers.
pub fn grading_check(sd: &SpectralDecomposition, alg: &LieAlgebra, tol: f64) -> Result<GradingReport> {
    if sd.dim() != alg.dim() {
        return Err(Error::DimensionMismatch { expected: alg.dim(), found: sd.dim() });
    }
    let n = alg.dim();
    let ident = DMatrix::<f64>::identity(n, n);
    let match_tol = (2.0 * sd.tol_realpart).max(1e-7);
    let mut pairs = Vec::new();
    for (a, la) in sd.layers.iter().enumerate() {
        for lb in sd.layers.iter().skip(a) {
            let sum = la.real_part + lb.real_part;
            let target = sd
                .layers
                .iter()
                .filter(|l| (l.real_part - sum).abs() <= match_tol * (1.0 + sum.abs()))
                .min_by(|x, y| {
                    (x.real_part - sum).abs().partial_cmp(&(y.real_part - sum).abs()).unwrap()
                });
            let complement = match target {
                Some(l) => &ident - &l.projection,
                None => ident.clone(),
            };
            let mut residual = 0.0_f64;
            for u in la.basis.column_iter() {
                for w in lb.basis.column_iter() {
                    let br = alg.bracket_unchecked(&u.clone_owned(), &w.clone_owned());
                    residual = residual.max((&complement * br).norm());
                }
            }
            pairs.push(GradingPair {
                alpha: la.real_part,
                beta: lb.real_part,
                target: target.map(|l| l.real_part),
                residual,
            });
        }
    }
    let max_residual = pairs.iter().fold(0.0_f64, |acc, p| acc.max(p.residual));
    Ok(GradingReport { pass: max_residual <= tol, max_residual, tol, pairs })
}

/// Whether `D` restricted to the span of `subspace_basis` is diagonalizable
/// over ℂ.
///
/// For each eigenvalue cluster `α` of multiplicity `m` the restriction must
/// satisfy `rank(D|_V − αI) = d − m`.
pub fn is_semisimple_on(d: &DMatrix<f64>, subspace_basis: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let n = d.nrows();
    if subspace_basis.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: subspace_basis.nrows() });
    }
    let q = linalg::column_span(subspace_basis, 1e-12, 0.0);
    let dim = q.ncols();
    if dim == 0 {
        return Ok(true);
    }
    let image = d * &q;
    let scale = d.norm().max(1.0);
    let leak = (&image - &q * (q.transpose() * &image)).norm();
    if leak > tol * scale {
        return Err(Error::InvariantSubspaceViolation { residual: leak });
    }
    let r = q.transpose() * image;
    let eig: Vec<Complex<f64>> = r.complex_eigenvalues().iter().cloned().collect();

    let mut clusters: Vec<Vec<Complex<f64>>> = Vec::new();
    for z in eig {
        if let Some(c) = clusters.iter_mut().find(|c| c.iter().any(|w| (w - z).norm() <= tol * scale)) {
            c.push(z);
        } else {
            clusters.push(vec![z]);
        }
    }
    for c in &clusters {
        let mult = c.len();
        let alpha = c.iter().sum::<Complex<f64>>() / mult as f64;
        // rank over ℂ of (R − αI) through its real 2d×2d embedding
        let mut emb = DMatrix::<f64>::zeros(2 * dim, 2 * dim);
        for i in 0..dim {
            for j in 0..dim {
                let re = r[(i, j)] - if i == j { alpha.re } else { 0.0 };
                let im = if i == j { -alpha.im } else { 0.0 };
                emb[(i, j)] = re;
                emb[(i + dim, j + dim)] = re;
                emb[(i, j + dim)] = -im;
                emb[(i + dim, j)] = im;
            }
        }
        let rank = linalg::numerical_rank(&emb, 0.0, tol * scale) / 2;
        if rank != dim - mult {
            return Ok(false);
        }
    }
    Ok(true)
}
