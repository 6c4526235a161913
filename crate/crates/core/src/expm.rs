//! Matrix exponential by scaling and squaring with diagonal Padé approximants.
//!
//! Degree selection and the θ thresholds follow Higham, "The Scaling and
//! Squaring Method for the Matrix Exponential Revisited" (2005): the lowest
//! degree in {3, 5, 7, 9} whose threshold bounds ‖A‖₁ is used, otherwise the
//! matrix is scaled by 2^-s into the degree-13 region and squared back.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spinops::CMatrix;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
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

pub(crate) fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled(a: &CMatrix, s: f64) -> CMatrix {
    a * Complex64::new(s, 0.0)
}

/// Odd part `U` and even part `V` of the degree-m Padé numerator, built from
/// the even powers `A², A⁴, …` supplied in `pows`.
fn pade_low(a: &CMatrix, pows: &[CMatrix], b: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    let mut u = scaled(&id, b[1]);
    let mut v = scaled(&id, b[0]);
    for (j, p) in pows.iter().enumerate() {
        u += scaled(p, b[2 * j + 3]);
        v += scaled(p, b[2 * j + 2]);
    }
    (a * u, v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let u_inner = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u = a
        * (&a6 * u_inner
            + scaled(&a6, b[7])
            + scaled(&a4, b[5])
            + scaled(&a2, b[3])
            + scaled(&id, b[1]));
    let v_inner = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * v_inner
        + scaled(&a6, b[6])
        + scaled(&a4, b[4])
        + scaled(&a2, b[2])
        + scaled(&id, b[0]);
    (u, v)
}

fn pade_ratio(u: CMatrix, v: CMatrix) -> Result<CMatrix> {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Exponential("singular Padé denominator".into()))
}

/// `exp(a)` for a dense square complex matrix.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let norm = one_norm(a);
    if !norm.is_finite() || a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Exponential("non-finite input".into()));
    }
    let n = a.nrows();
    if norm == 0.0 {
        return Ok(CMatrix::identity(n, n));
    }

    let result = if norm <= THETA[3].1 {
        let a2 = a * a;
        let mut pows = vec![a2];
        let (m, b): (usize, &[f64]) = THETA
            .iter()
            .find(|(_, theta)| norm <= *theta)
            .map(|&(m, _)| match m {
                3 => (3, &B3[..]),
                5 => (5, &B5[..]),
                7 => (7, &B7[..]),
                _ => (9, &B9[..]),
            })
            .expect("norm below the largest low-degree threshold");
        while pows.len() < (m - 1) / 2 {
            let next = pows.last().unwrap() * &pows[0];
            pows.push(next);
        }
        let (u, v) = pade_low(a, &pows, b);
        pade_ratio(u, v)?
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let a_s = scaled(a, 0.5f64.powi(s));
        let (u, v) = pade13(&a_s);
        let mut r = pade_ratio(u, v)?;
        for _ in 0..s {
            r = &r * &r;
        }
        r
    };

    if result
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::Exponential("result is not finite".into()));
    }
    Ok(result)
}
