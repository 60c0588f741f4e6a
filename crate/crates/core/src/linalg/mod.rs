//! Dense linear-algebra kernels shared by the analysis modules.

mod expm;
mod schur;
mod sylvester;

pub use expm::expm;
pub use schur::{QuasiBlock, RealSchur};
pub use sylvester::{solve_lyapunov, solve_sylvester, solve_sylvester_quasi_triangular};

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;

/// Orthonormal basis of the column span of `m`.
///
/// Singular values below `max(rel_tol * sigma_max, abs_floor)` are treated as
/// zero. Columns are sign-normalized so the entry of largest magnitude is
/// positive, which makes the result deterministic.
pub fn column_span(m: &DMatrix<f64>, rel_tol: f64, abs_floor: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = (rel_tol * smax).max(abs_floor);
    // nalgebra does not guarantee sorted singular values
    let mut idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > threshold)
        .collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let mut basis = DMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        basis.set_column(c, &u.column(i));
    }
    normalize_signs(&mut basis);
    basis
}

/// Numerical rank by singular values with threshold `max(rel_tol * sigma_max, abs_floor)`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64, abs_floor: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = (rel_tol * smax).max(abs_floor);
    sv.iter().filter(|&&s| s > threshold).count()
}

/// Orthonormalizes the columns of a full-column-rank matrix.
///
/// Modified Gram–Schmidt with one reorthogonalization pass; unit coordinate
/// columns come back exactly.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let r = q.column(i).dot(&q.column(j));
                if r != 0.0 {
                    let qi = q.column(i).clone_owned();
                    q.column_mut(j).axpy(-r, &qi, 1.0);
                }
            }
        }
        let norm = q.column(j).norm();
        if norm > 0.0 {
            q.column_mut(j).unscale_mut(norm);
        }
    }
    normalize_signs(&mut q);
    q
}

/// Flips column signs so each column's largest-magnitude entry is positive.
pub fn normalize_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best * (1.0 + 1e-12) {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Distance of `v` from the span of the orthonormal columns of `basis`.
pub fn distance_to_span(basis: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let coeffs = basis.transpose() * v;
    (v - basis * coeffs).norm()
}

/// Largest real part over the eigenvalues of `m` (negative infinity for 0x0).
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest entry in absolute value.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, &x| acc.max(x.abs()))
}

/// Euclidean norm that does not overflow for entries beyond `1e154`.
pub fn scaled_norm(v: &DVector<f64>) -> f64 {
    let m = v.amax();
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * (v / m).norm()
}
