//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const B: [f64; 14] = [
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

const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// e^A for a square matrix.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Invalid("expm needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(a.clone());
    }
    let nrm = norm1(a);
    if !nrm.is_finite() {
        return Err(Error::Invalid("expm input is not finite".into()));
    }
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9]) + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &id * B[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8]) + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &id * B[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(Error::Singular)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_diagonal() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert!((expm(&z).unwrap() - DMatrix::identity(3, 3)).norm() < 1e-15);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 30.0]));
        let e = expm(&d).unwrap();
        for (i, v) in [1.0f64, -2.0, 30.0].iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).abs() <= 1e-13 * v.exp());
        }
    }

    #[test]
    fn rotation_generator() {
        let t = 2.5f64;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = expm(&a).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!((e - want).norm() < 1e-13);
    }

    #[test]
    fn nilpotent_matches_series() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let want = DMatrix::identity(3, 3) + &a + &a * &a * 0.5;
        assert!((expm(&a).unwrap() - want).norm() < 1e-13);
    }

    #[test]
    fn two_state_chain_closed_form() {
        let (a, b, t) = (3.0f64, 1.0f64, 0.7f64);
        let q = DMatrix::from_row_slice(2, 2, &[-a, a, b, -b]) * t;
        let e = expm(&q).unwrap();
        let s = a + b;
        let decay = (-s * t).exp();
        assert!((e[(0, 0)] - (b + a * decay) / s).abs() < 1e-14);
        assert!((e[(0, 1)] - (a - a * decay) / s).abs() < 1e-14);
    }
}
