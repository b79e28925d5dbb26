//! Pfaffians and determinants in log-magnitude form.

use crate::error::{Error, Result};
use crate::par;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Field elements the elimination kernels work over (`f64` and `Complex64`).
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn modulus(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// `phase * exp(log_abs)`, with `phase` of unit modulus, or exactly zero.
///
/// Zero is carried by `phase == 0` and never by an infinite log, so the
/// value can be combined arithmetically without producing NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarLog<T> {
    pub phase: T,
    pub log_abs: f64,
}

impl<T: Scalar> PolarLog<T> {
    pub fn zero() -> Self {
        PolarLog { phase: T::zero(), log_abs: 0.0 }
    }
    pub fn is_zero(&self) -> bool {
        self.phase.modulus() == 0.0
    }
    /// Plain value; may overflow to infinity for large matrices.
    pub fn value(&self) -> T {
        if self.is_zero() {
            T::zero()
        } else {
            self.phase.scale(self.log_abs.exp())
        }
    }
    pub fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        PolarLog { phase: self.phase * other.phase, log_abs: self.log_abs + other.log_abs }
    }
    pub fn log_modulus(&self) -> Option<f64> {
        (!self.is_zero()).then_some(self.log_abs)
    }
}

impl PolarLog<f64> {
    /// `-1`, `0` or `+1`.
    pub fn sign(&self) -> f64 {
        self.phase
    }
}

/// A nonnegative quantity stored by its logarithm, with zero kept explicit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogValue {
    Zero,
    Log(f64),
}

impl LogValue {
    pub fn from_value(x: f64) -> Self {
        if x > 0.0 {
            LogValue::Log(x.ln())
        } else {
            LogValue::Zero
        }
    }
    pub fn log(self) -> Option<f64> {
        match self {
            LogValue::Zero => None,
            LogValue::Log(l) => Some(l),
        }
    }
    /// Plain value; overflows to infinity for huge logs.
    pub fn value(self) -> f64 {
        match self {
            LogValue::Zero => 0.0,
            LogValue::Log(l) => l.exp(),
        }
    }
    pub fn is_zero(self) -> bool {
        self == LogValue::Zero
    }
}

/// Combine signed log-magnitudes `s_i exp(l_i)` linearly without overflow.
///
/// Returns `(scale, scaled)` with `result_j = scaled_j * exp(scale)`.
pub fn log_linear_combination(terms: &[(f64, f64)], coeffs: &[&[f64]]) -> (f64, Vec<f64>) {
    let scale = terms
        .iter()
        .filter(|t| t.0 != 0.0)
        .map(|t| t.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if !scale.is_finite() {
        return (0.0, vec![0.0; coeffs.len()]);
    }
    let scaled: Vec<f64> = terms
        .iter()
        .map(|&(s, l)| if s == 0.0 { 0.0 } else { s * (l - scale).exp() })
        .collect();
    let out = coeffs
        .iter()
        .map(|row| row.iter().zip(&scaled).map(|(c, v)| c * v).sum())
        .collect();
    (scale, out)
}

/// Largest |A + A^T| relative to the largest entry.
pub fn skew_residual<T: Scalar>(a: &DMatrix<T>) -> f64 {
    let n = a.nrows();
    let mut big = 0.0f64;
    let mut res = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            big = big.max(a[(i, j)].modulus());
            if j >= i {
                res = res.max((a[(i, j)] + a[(j, i)]).modulus());
            }
        }
    }
    if big == 0.0 {
        0.0
    } else {
        res / big
    }
}

/// Pfaffian of a skew-symmetric matrix by pivoted skew elimination.
///
/// Each step brings the largest entry of the current row into the
/// superdiagonal slot, takes it as the pivot, and applies the rank-two Schur
/// update to the trailing block. Row updates are independent and run through
/// [`par::for_each_row_mut`]. Cost is about n^3/3 multiply-adds.
pub fn pfaffian<T: Scalar>(a: &DMatrix<T>) -> Result<PolarLog<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::MalformedDomain("Pfaffian of a non-square matrix".into()));
    }
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    let res = skew_residual(a);
    if res > 1e-12 {
        return Err(Error::NotSkew(res));
    }
    let mut m: Vec<T> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            m.push(a[(i, j)]);
        }
    }
    Ok(pfaffian_rowmajor(&mut m, n))
}

/// Same as [`pfaffian`] on a row-major buffer that is destroyed. No checks.
pub fn pfaffian_rowmajor<T: Scalar>(m: &mut [T], n: usize) -> PolarLog<T> {
    let mut phase = T::one();
    let mut log_abs = 0.0;
    let mut k = 0;
    while k < n {
        let mut p = k + 1;
        let mut best = m[k * n + p].modulus();
        for j in k + 2..n {
            let v = m[k * n + j].modulus();
            if v > best {
                best = v;
                p = j;
            }
        }
        if best == 0.0 {
            return PolarLog::zero();
        }
        if p != k + 1 {
            swap_index(m, n, k + 1, p);
            phase = -phase;
        }
        let piv = m[k * n + k + 1];
        let pm = piv.modulus();
        log_abs += pm.ln();
        phase = phase * piv.scale(1.0 / pm);
        if k + 2 < n {
            let start = k + 2;
            let row_k: Vec<T> = m[k * n + start..k * n + n].to_vec();
            let row_k1: Vec<T> = m[(k + 1) * n + start..(k + 1) * n + n].to_vec();
            let tail = &mut m[start * n..];
            par::for_each_row_mut(tail, n, |_, row| {
                // row holds A[i][*] for some i >= k+2
                let aik = row[k] / piv;
                let aik1 = row[k + 1] / piv;
                if aik.modulus() == 0.0 && aik1.modulus() == 0.0 {
                    return;
                }
                for (jj, x) in row[start..].iter_mut().enumerate() {
                    *x = *x + aik * row_k1[jj] - aik1 * row_k[jj];
                }
            });
        }
        k += 2;
    }
    PolarLog { phase, log_abs }
}

fn swap_index<T: Scalar>(m: &mut [T], n: usize, a: usize, b: usize) {
    for j in 0..n {
        m.swap(a * n + j, b * n + j);
    }
    for i in 0..n {
        m.swap(i * n + a, i * n + b);
    }
}

/// Determinant through nalgebra's partial-pivot LU.
pub fn det_log(a: &DMatrix<Complex64>) -> PolarLog<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return PolarLog { phase: Complex64::new(1.0, 0.0), log_abs: 0.0 };
    }
    let lu = a.clone().lu();
    let mut phase: Complex64 = lu.p().determinant();
    let mut log_abs = 0.0;
    let u = lu.u();
    for i in 0..n {
        let d = u[(i, i)];
        let dm = d.norm();
        if dm == 0.0 {
            return PolarLog::zero();
        }
        log_abs += dm.ln();
        phase *= d / dm;
    }
    PolarLog { phase, log_abs }
}

/// Plain complex determinant (small matrices).
pub fn det(a: &DMatrix<Complex64>) -> Complex64 {
    if a.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    a.clone().lu().determinant()
}

/// Brute-force Pfaffian by summing over all pairings. Test oracle only.
pub fn pfaffian_pairings<T: Scalar>(a: &DMatrix<T>) -> T {
    fn rec<T: Scalar>(a: &DMatrix<T>, left: &mut Vec<usize>) -> T {
        if left.is_empty() {
            return T::one();
        }
        let i = left.remove(0);
        let mut total = T::zero();
        for pos in 0..left.len() {
            let j = left.remove(pos);
            let sub = rec(a, left);
            let term = a[(i, j)] * sub;
            total = if pos % 2 == 0 { total + term } else { total - term };
            left.insert(pos, j);
        }
        left.insert(0, i);
        total
    }
    let mut idx: Vec<usize> = (0..a.nrows()).collect();
    rec(a, &mut idx)
}
