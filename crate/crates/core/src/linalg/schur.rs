//! Real Schur form with standardized blocks and adjacent-block swapping.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;

use super::sylvester::solve_sylvester_quasi_triangular;
use crate::error::{Error, Result};

/// A diagonal block of a quasi-triangular matrix.
///
/// `im` is zero for 1×1 blocks and positive for 2×2 blocks, which carry the
/// conjugate pair `re ± i·im`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiBlock {
    pub start: usize,
    pub size: usize,
    pub re: f64,
    pub im: f64,
}

/// `M = Q T Qᵀ` with `Q` orthogonal and `T` upper quasi-triangular.
///
/// Every 2×2 diagonal block of `T` holds a genuinely complex conjugate pair;
/// blocks with real eigenvalues are split during standardization.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

/// Starts and sizes of the diagonal blocks, read off the subdiagonal.
pub(crate) fn quasi_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

impl RealSchur {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput("Schur form requires a square matrix".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let n = m.nrows();
        if n == 0 {
            return Ok(Self { q: DMatrix::zeros(0, 0), t: DMatrix::zeros(0, 0) });
        }
        let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
            .ok_or(Error::NonConvergence { what: "real Schur iteration", residual: f64::NAN })?;
        let (q, t) = schur.unpack();
        let mut rs = Self { q, t };
        rs.standardize()?;
        Ok(rs)
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn blocks(&self) -> Vec<QuasiBlock> {
        quasi_blocks(&self.t)
            .into_iter()
            .map(|(start, size)| {
                let (re, im) = if size == 1 {
                    (self.t[(start, start)], 0.0)
                } else {
                    let (re, disc) = block_discriminant(&self.t, start);
                    (re, (-disc).max(0.0).sqrt())
                };
                QuasiBlock { start, size, re, im }
            })
            .collect()
    }

    /// Cleans negligible subdiagonal entries, zeroes everything below the
    /// first subdiagonal, and splits 2×2 blocks whose eigenvalues are real.
    fn standardize(&mut self) -> Result<()> {
        let n = self.dim();
        for j in 0..n {
            for i in (j + 2)..n {
                self.t[(i, j)] = 0.0;
            }
        }
        for i in 0..n.saturating_sub(1) {
            let sub = self.t[(i + 1, i)].abs();
            let local = self.t[(i, i)].abs() + self.t[(i + 1, i + 1)].abs();
            if sub <= f64::EPSILON * local {
                self.t[(i + 1, i)] = 0.0;
            }
        }
        let mut i = 0;
        while i + 1 < n {
            if self.t[(i + 1, i)] == 0.0 {
                i += 1;
                continue;
            }
            if i + 2 < n && self.t[(i + 2, i + 1)] != 0.0 {
                return Err(Error::NonConvergence {
                    what: "real Schur standardization",
                    residual: self.t[(i + 2, i + 1)].abs(),
                });
            }
            let (_, disc) = block_discriminant(&self.t, i);
            if disc >= 0.0 {
                self.split_real_block(i);
                i += 1;
            } else {
                i += 2;
            }
        }
        Ok(())
    }

    /// Triangularizes the 2×2 block at `i`, which has real eigenvalues.
    fn split_real_block(&mut self, i: usize) {
        let (a, b, c, d) = (
            self.t[(i, i)],
            self.t[(i, i + 1)],
            self.t[(i + 1, i)],
            self.t[(i + 1, i + 1)],
        );
        let (mean, disc) = block_discriminant(&self.t, i);
        let root = disc.max(0.0).sqrt();
        // eigenvalue of larger magnitude first for a stable eigenvector
        let lambda = if mean >= 0.0 { mean + root } else { mean - root };
        let v1 = (b, lambda - a);
        let v2 = (lambda - d, c);
        let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
        let r = x.hypot(y);
        if r == 0.0 {
            return;
        }
        let (cs, sn) = (x / r, y / r);
        let g = DMatrix::from_row_slice(2, 2, &[cs, -sn, sn, cs]);
        self.apply_orthogonal(i, &g);
        self.t[(i + 1, i)] = 0.0;
    }

    /// Replaces `T` by `Gᵀ T G` and `Q` by `Q G` where `G` acts on the
    /// index window starting at `k`.
    fn apply_orthogonal(&mut self, k: usize, g: &DMatrix<f64>) {
        let n = self.dim();
        let w = g.nrows();
        let rows = g.transpose() * self.t.view((k, 0), (w, n));
        self.t.view_mut((k, 0), (w, n)).copy_from(&rows);
        let cols = self.t.view((0, k), (n, w)) * g;
        self.t.view_mut((0, k), (n, w)).copy_from(&cols);
        let qcols = self.q.view((0, k), (n, w)) * g;
        self.q.view_mut((0, k), (n, w)).copy_from(&qcols);
    }

    /// Swaps the adjacent diagonal blocks starting at `k` (size `p`) and
    /// `k + p` (size `q`) by an orthogonal similarity.
    pub fn swap_adjacent(&mut self, k: usize, p: usize, q: usize) -> Result<()> {
        let n = self.dim();
        if k + p + q > n {
            return Err(Error::InvalidInput("block swap out of range".into()));
        }
        let a11 = self.t.view((k, k), (p, p)).clone_owned();
        let a22 = self.t.view((k + p, k + p), (q, q)).clone_owned();
        let a12 = self.t.view((k, k + p), (p, q)).clone_owned();
        // columns [X; I] span the invariant subspace of the trailing block
        let x = solve_sylvester_quasi_triangular(&a11, &(-&a22), &(-&a12))?;
        let g = if p == 1 && q == 1 {
            // Givens rotation whose first column is the normalized [x; 1]
            let r = x[(0, 0)].hypot(1.0);
            let (c, s) = (x[(0, 0)] / r, 1.0 / r);
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
        } else {
            householder_basis(&x, p, q)
        };
        self.apply_orthogonal(k, &g);

        let scale = super::max_abs(&a11).max(super::max_abs(&a22)).max(super::max_abs(&a12));
        let leak = self.t.view((k + q, k), (p, q)).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if leak > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NonConvergence { what: "Schur block swap", residual: leak });
        }
        self.t.view_mut((k + q, k), (p, q)).fill(0.0);
        // the relocated blocks keep their spectra; re-split only when a
        // 2×2 block turned out numerically real
        self.standardize()?;
        Ok(())
    }

    /// Stable bubble sort of the diagonal blocks by `key` (ascending).
    pub fn reorder_by<F>(&mut self, key: F) -> Result<()>
    where
        F: Fn(&QuasiBlock) -> usize,
    {
        loop {
            let blocks = self.blocks();
            let mut swapped = false;
            for pair in blocks.windows(2) {
                if key(&pair[0]) > key(&pair[1]) {
                    self.swap_adjacent(pair[0].start, pair[0].size, pair[1].size)?;
                    swapped = true;
                    break;
                }
            }
            if !swapped {
                return Ok(());
            }
        }
    }

    /// Reconstructs `Q T Qᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.q * &self.t * self.q.transpose()
    }
}

/// Orthogonal matrix whose leading `q` columns span the columns of `[X; I]`.
fn householder_basis(x: &DMatrix<f64>, p: usize, q: usize) -> DMatrix<f64> {
    let w = p + q;
    let mut m = DMatrix::<f64>::zeros(w, w);
    m.view_mut((0, 0), (p, q)).copy_from(x);
    for i in 0..q {
        m[(p + i, i)] = 1.0;
    }
    for i in 0..p {
        m[(i, q + i)] = 1.0;
    }
    m.qr().q()
}

/// Mean and discriminant of the 2×2 block at `i`; eigenvalues are
/// `mean ± sqrt(disc)`.
fn block_discriminant(t: &DMatrix<f64>, i: usize) -> (f64, f64) {
    let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    (mean, half * half + b * c)
}
