//! Matrix exponential by scaling and squaring with Padé approximants
//! (Higham 2005 degree selection).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential `e^M`.
///
/// Fails on non-finite input and when the result overflows.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidInput("expm requires a square matrix".into()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("expm input has non-finite entries".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = one_norm(m);
    let result = if let Some(&(deg, _)) = THETA.iter().find(|(_, th)| norm <= *th) {
        pade_low(m, deg)?
    } else {
        let s = if norm > THETA_13 {
            (norm / THETA_13).log2().ceil().max(0.0) as i32
        } else {
            0
        };
        let scaled = m / 2f64.powi(s);
        let mut r = pade13(&scaled)?;
        for _ in 0..s {
            r = &r * &r;
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::Overflow("matrix exponential"));
            }
        }
        r
    };
    if result.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("matrix exponential"));
    }
    Ok(result)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn pade_low(a: &DMatrix<f64>, deg: usize) -> Result<DMatrix<f64>> {
    let b: &[f64] = match deg {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let mut powers = vec![ident.clone(), a2.clone()];
    for _ in 2..=(deg / 2) {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        u += p * b[2 * k + 1];
        v += p * b[2 * k];
    }
    let u = a * u;
    solve_pade(&u, &v)
}

fn pade13(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let b = &B13;
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];
    solve_pade(&u, &v)
}

/// Returns `(V - U)^{-1} (V + U)`.
fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::InvalidInput("Padé denominator is singular".into()))
}
