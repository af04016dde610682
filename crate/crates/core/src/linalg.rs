//! Dense matrix functions for the small (l x l) matrices of the chain.
//!
//! `expm` is the scaling-and-squaring algorithm with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham, 2005), generic over real
//! and complex entries. `logm` uses inverse scaling and squaring: repeated
//! Denman-Beavers square roots followed by the `atanh` series.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
];
const THETA_13: f64 = 5.371_920_351_148_152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Maximum absolute column sum.
pub fn norm1<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, c: f64) -> DMatrix<T> {
    a.map(|x| x * T::from_real(c))
}

fn pade_low<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    coeffs: &[f64],
) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut power = DMatrix::<T>::identity(n, n);
    let mut u_inner = scaled(&power, coeffs[1]);
    let mut v = scaled(&power, coeffs[0]);
    for k in (2..coeffs.len()).step_by(2) {
        power = &power * &a2;
        v += scaled(&power, coeffs[k]);
        u_inner += scaled(&power, coeffs[k + 1]);
    }
    (a * u_inner, v)
}

fn pade_13<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let b = &PADE_13;
    let n = a.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u_inner = &a6 * u_hi
        + scaled(&a6, b[7])
        + scaled(&a4, b[5])
        + scaled(&a2, b[3])
        + scaled(&id, b[1]);
    let u = a * u_inner;
    let v_hi = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * v_hi + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&id, b[0]);
    (u, v)
}

/// Matrix exponential of a square matrix.
pub fn expm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> DMatrix<T> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    if n == 1 {
        return DMatrix::from_element(1, 1, a[(0, 0)].clone().exp());
    }
    let norm = norm1(a);
    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE_3,
                5 => &PADE_5,
                7 => &PADE_7,
                _ => &PADE_9,
            };
            let (u, v) = pade_low(a, coeffs);
            return solve_pade(u, v);
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a_scaled = scaled(a, 0.5f64.powi(s));
    let (u, v) = pade_13(&a_scaled);
    let mut r = solve_pade(u, v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn solve_pade<T: ComplexField<RealField = f64>>(u: DMatrix<T>, v: DMatrix<T>) -> DMatrix<T> {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for arguments within the scaling bound")
}

/// `exp(t * a) * 1` for a real matrix.
pub fn expm_times_ones(a: &DMatrix<f64>, t: f64) -> DVector<f64> {
    let e = expm(&(a * t));
    DVector::from_iterator(e.nrows(), e.row_iter().map(|r| r.sum()))
}

/// `exp(t * a) * 1` for a complex matrix.
pub fn expm_times_ones_c(a: &DMatrix<Complex64>, t: f64) -> DVector<Complex64> {
    let e = expm(&a.map(|z| z * t));
    DVector::from_iterator(e.nrows(), e.row_iter().map(|r| r.sum()))
}

fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::NoValidGenerator {
            reason: "singular iterate while taking matrix square roots".into(),
        })
}

/// Principal square root by the product form of the Denman-Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let y_inv = inverse(&y)?;
        let z_inv = inverse(&z)?;
        let y_next = (&y + z_inv) * 0.5;
        let z_next = (&z + y_inv) * 0.5;
        let delta = norm1(&(&y_next - &y)) / norm1(&y_next).max(f64::MIN_POSITIVE);
        y = y_next;
        z = z_next;
        if delta < 1e-15 {
            return Ok(y);
        }
    }
    // Slow convergence only happens near the negative real axis.
    Err(Error::NoValidGenerator {
        reason: "square-root iteration did not converge".into(),
    })
}

/// Principal logarithm of a real matrix with no eigenvalues on the closed
/// negative real axis.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    assert!(a.is_square(), "logm needs a square matrix");
    let n = a.nrows();
    for ev in a.complex_eigenvalues().iter() {
        if ev.re <= 0.0 && ev.im.abs() <= 1e-12 * (1.0 + ev.re.abs()) {
            return Err(Error::NoValidGenerator {
                reason: format!("eigenvalue {:.6} on the non-positive real axis, real logarithm undefined", ev.re),
            });
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = a.clone();
    let mut squarings = 0;
    while norm1(&(&x - &id)) > 0.25 {
        x = sqrtm(&x)?;
        squarings += 1;
        if squarings > 60 {
            return Err(Error::NoValidGenerator {
                reason: "matrix does not approach the identity under square roots".into(),
            });
        }
    }
    // log(X) = 2 atanh(Z), Z = (X - I)(X + I)^{-1}
    let z = (&x - &id) * inverse(&(&x + &id))?;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut sum = z.clone();
    for k in 1..60 {
        term = &term * &z2;
        let contrib = &term / (2 * k + 1) as f64;
        sum += &contrib;
        if norm1(&contrib) < 1e-18 {
            break;
        }
    }
    Ok(sum * (2.0 * 2f64.powi(squarings)))
}
