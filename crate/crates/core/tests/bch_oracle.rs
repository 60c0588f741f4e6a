//! The group law against matrix exponentials: strictly upper-triangular
//! `n × n` matrices form a nilpotent algebra of step `n - 1` where `exp` and
//! `log` are finite sums.

use linflow::lie::default_labels;
use linflow::{AlgebraVector, LieAlgebra, NilpotentGroup};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn to_matrix(n: usize, x: &AlgebraVector) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (c, &(i, j)) in pairs(n).iter().enumerate() {
        m[(i, j)] = x[c];
    }
    m
}

fn to_coords(n: usize, m: &DMatrix<f64>) -> AlgebraVector {
    DVector::from_iterator(pairs(n).len(), pairs(n).into_iter().map(|(i, j)| m[(i, j)]))
}

fn upper_triangular_algebra(n: usize) -> LieAlgebra {
    let p = pairs(n);
    let mut brackets = Vec::new();
    for a in 0..p.len() {
        for b in a + 1..p.len() {
            let (ea, eb) = (to_matrix(n, &unit(p.len(), a)), to_matrix(n, &unit(p.len(), b)));
            let c = &ea * &eb - &eb * &ea;
            let v = to_coords(n, &c);
            if v.iter().any(|&x| x != 0.0) {
                brackets.push((a, b, v.iter().cloned().collect()));
            }
        }
    }
    LieAlgebra::from_brackets(default_labels(p.len()), &brackets).unwrap()
}

fn unit(d: usize, k: usize) -> AlgebraVector {
    let mut v = DVector::zeros(d);
    v[k] = 1.0;
    v
}

fn exp_nilpotent(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..n {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

fn log_unipotent(u: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    let x = u - DMatrix::identity(n, n);
    let mut power = x.clone();
    let mut sum = DMatrix::zeros(n, n);
    for k in 1..n {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += &power * (sign / k as f64);
        power = &power * &x;
    }
    sum
}

fn oracle(n: usize, x: &AlgebraVector, y: &AlgebraVector) -> AlgebraVector {
    let z = log_unipotent(&(exp_nilpotent(&to_matrix(n, x)) * exp_nilpotent(&to_matrix(n, y))));
    to_coords(n, &z)
}

fn check(n: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<(), TestCaseError> {
    let alg = upper_triangular_algebra(n);
    let group = NilpotentGroup::new(alg).unwrap();
    prop_assert_eq!(group.step(), n - 1);
    let (x, y) = (DVector::from_vec(xs), DVector::from_vec(ys));
    let got = group.bch(&x, &y).unwrap();
    let want = oracle(n, &x, &y);
    let err = (&got - &want).amax();
    prop_assert!(err <= 1e-12 * (1.0 + want.amax()), "n = {}, error {:e}", n, err);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_two(xs in prop::collection::vec(-2.0..2.0f64, 3), ys in prop::collection::vec(-2.0..2.0f64, 3)) {
        check(3, xs, ys)?;
    }

    #[test]
    fn step_three(xs in prop::collection::vec(-1.5..1.5f64, 6), ys in prop::collection::vec(-1.5..1.5f64, 6)) {
        check(4, xs, ys)?;
    }

    #[test]
    fn step_six(xs in prop::collection::vec(-1.0..1.0f64, 21), ys in prop::collection::vec(-1.0..1.0f64, 21)) {
        check(7, xs, ys)?;
    }
}

#[test]
fn deeper_algebras_are_rejected() {
    let alg = upper_triangular_algebra(8);
    assert_eq!(alg.nilpotency_step(), Some(7));
    assert_eq!(NilpotentGroup::new(alg).unwrap_err().kind(), "StepTooLarge");
}
