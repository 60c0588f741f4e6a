//! Inputs shared by the benchmarks.

use linflow::lie::fixtures::{filiform, heisenberg};
use linflow::spectral::{spectral_decompose, DEFAULT_TOL_REALPART};
use linflow::{Derivation, GroupConjugacy, NilpotentGroup, SpectralDecomposition};
use nalgebra::{DMatrix, DVector};

pub struct Splitting {
    pub group: NilpotentGroup,
    pub decomposition: SpectralDecomposition,
    pub point: DVector<f64>,
}

/// Dense `n × n` matrix with spectrum spread over `[-2, 2]` and a shear.
pub fn test_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 + 4.0 * i as f64 / n.max(2) as f64 + 0.01
        } else {
            ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5
        }
    })
}

/// Filiform algebra of dimension `n` with the grading derivation
/// `diag(1, 1-n, 2-n, …, -1)`.
pub fn filiform_derivation(n: usize) -> Derivation {
    let mut weights = vec![1.0];
    weights.extend((1..n).map(|k| k as f64 - n as f64));
    Derivation::diagonal(&weights, filiform(n)).unwrap()
}

pub fn splitting(n: usize) -> Splitting {
    let d = filiform_derivation(n);
    let decomposition = spectral_decompose(&d, DEFAULT_TOL_REALPART).unwrap();
    let group = NilpotentGroup::new(d.algebra().clone()).unwrap();
    let point = DVector::from_fn(n, |i, _| 0.3 + 0.1 * i as f64);
    Splitting { group, decomposition, point }
}

pub fn heisenberg_conjugacy() -> GroupConjugacy {
    let src = Derivation::diagonal(&[1.0, -2.0, -1.0], heisenberg()).unwrap();
    let dst = Derivation::diagonal(&[2.0, -3.0, -1.0], heisenberg()).unwrap();
    linflow::build_group_conjugacy(&src, &dst, DEFAULT_TOL_REALPART).unwrap()
}
