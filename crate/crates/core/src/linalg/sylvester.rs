//! Bartels–Stewart solver for `A X + X B = C`.

use nalgebra::DMatrix;

use super::schur::{quasi_blocks, RealSchur};
use crate::error::{Error, Result};

/// Solves `A X + X B = C` for general square `A` (m×m) and `B` (n×n).
///
/// Both coefficient matrices are reduced to real Schur form and the
/// transformed system is solved block by block. Fails when `A` and `-B`
/// share an eigenvalue (the operator is singular).
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shapes(a, b, c)?;
    let sa = RealSchur::new(a)?;
    let sb = RealSchur::new(b)?;
    let f = sa.q.transpose() * c * &sb.q;
    let y = solve_sylvester_quasi_triangular(&sa.t, &sb.t, &f)?;
    Ok(&sa.q * y * sb.q.transpose())
}

/// Solves the continuous Lyapunov equation `Aᵀ P + P A = -Q` and returns the
/// symmetrized solution.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let at = a.transpose();
    let p = solve_sylvester(&at, a, &(-q))?;
    Ok((&p + p.transpose()) * 0.5)
}

/// Solves `S Y + Y R = F` where `S` and `R` are upper quasi-triangular
/// (real Schur form, 1×1 and 2×2 diagonal blocks).
pub fn solve_sylvester_quasi_triangular(
    s: &DMatrix<f64>,
    r: &DMatrix<f64>,
    f: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_shapes(s, r, f)?;
    let m = s.nrows();
    let n = r.nrows();
    let row_blocks = quasi_blocks(s);
    let col_blocks = quasi_blocks(r);
    let mut y = DMatrix::<f64>::zeros(m, n);
    let scale = 1.0 + super::max_abs(s).max(super::max_abs(r));

    for &(j0, q) in &col_blocks {
        for &(i0, p) in row_blocks.iter().rev() {
            let mut rhs = f.view((i0, j0), (p, q)).clone_owned();
            let tail = i0 + p;
            if tail < m {
                rhs -= s.view((i0, tail), (p, m - tail)) * y.view((tail, j0), (m - tail, q));
            }
            if j0 > 0 {
                rhs -= y.view((i0, 0), (p, j0)) * r.view((0, j0), (j0, q));
            }
            let s_ii = s.view((i0, i0), (p, p)).clone_owned();
            let r_jj = r.view((j0, j0), (q, q)).clone_owned();
            let block = solve_small(&s_ii, &r_jj, &rhs, scale)?;
            y.view_mut((i0, j0), (p, q)).copy_from(&block);
        }
    }
    Ok(y)
}

/// Solves `S Y + Y R = F` for blocks of size at most 2 via the Kronecker form
/// `(I ⊗ S + Rᵀ ⊗ I) vec(Y) = vec(F)`.
fn solve_small(s: &DMatrix<f64>, r: &DMatrix<f64>, f: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let p = s.nrows();
    let q = r.nrows();
    let k = p * q;
    let mut op = DMatrix::<f64>::zeros(k, k);
    for col in 0..q {
        for a in 0..p {
            for b in 0..p {
                op[(col * p + a, col * p + b)] += s[(a, b)];
            }
        }
    }
    for c1 in 0..q {
        for c2 in 0..q {
            for a in 0..p {
                op[(c1 * p + a, c2 * p + a)] += r[(c2, c1)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(f.as_slice());
    let lu = op.clone().lu();
    let sol = lu.solve(&rhs).ok_or_else(|| {
        Error::InvalidInput("Sylvester operator is singular (shared eigenvalues)".into())
    })?;
    // A pivot this small means the spectra of S and -R nearly touch.
    let smallest_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    if smallest_pivot <= f64::EPSILON * scale {
        return Err(Error::InvalidInput(
            "Sylvester operator is numerically singular (shared eigenvalues)".into(),
        ));
    }
    Ok(DMatrix::from_column_slice(p, q, sol.as_slice()))
}

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::InvalidInput("Sylvester coefficients must be square".into()));
    }
    if c.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: c.nrows() });
    }
    if c.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch { expected: b.nrows(), found: c.ncols() });
    }
    Ok(())
}
