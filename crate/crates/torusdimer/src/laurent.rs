//! Sparse bivariate Laurent polynomials with complex coefficients.

use crate::error::{Error, Result};
use crate::par;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Which variable an operation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Z,
    W,
}

/// Exponent bounding box of the support.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegreeBox {
    pub zmin: i32,
    pub zmax: i32,
    pub wmin: i32,
    pub wmax: i32,
}

/// `sum c_ij z^i w^j` stored as a map from exponent pair to coefficient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaurentPoly2 {
    terms: BTreeMap<(i32, i32), Complex64>,
}

/// Relative coefficient threshold below which interpolated terms are dropped.
pub const PRUNE_REL: f64 = 1e-10;

impl LaurentPoly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Build from `(i, j, c)` triples; repeated exponents are summed and exact zeros dropped.
    pub fn from_terms<I: IntoIterator<Item = (i32, i32, Complex64)>>(it: I) -> Self {
        let mut terms = BTreeMap::new();
        for (i, j, c) in it {
            *terms.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        terms.retain(|_, c: &mut Complex64| c.norm() != 0.0);
        LaurentPoly2 { terms }
    }

    /// Real-coefficient convenience constructor.
    pub fn from_real_terms(t: &[(i32, i32, f64)]) -> Self {
        Self::from_terms(t.iter().map(|&(i, j, c)| (i, j, Complex64::new(c, 0.0))))
    }

    pub fn terms(&self) -> impl Iterator<Item = ((i32, i32), Complex64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn coeff(&self, i: i32, j: i32) -> Complex64 {
        self.terms.get(&(i, j)).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn degree_box(&self) -> Option<DegreeBox> {
        let mut it = self.terms.keys();
        let &(i0, j0) = it.next()?;
        let mut b = DegreeBox { zmin: i0, zmax: i0, wmin: j0, wmax: j0 };
        for &(i, j) in it {
            b.zmin = b.zmin.min(i);
            b.zmax = b.zmax.max(i);
            b.wmin = b.wmin.min(j);
            b.wmax = b.wmax.max(j);
        }
        Some(b)
    }

    /// Evaluate; errors on a zero argument when a negative power is present.
    pub fn eval(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let b = match self.degree_box() {
            None => return Ok(Complex64::new(0.0, 0.0)),
            Some(b) => b,
        };
        if (z.norm() == 0.0 && b.zmin < 0) || (w.norm() == 0.0 && b.wmin < 0) {
            return Err(Error::ZeroArgument);
        }
        Ok(self.eval_unchecked(z, w))
    }

    /// Evaluate using power tables; caller guarantees nonzero arguments where needed.
    pub fn eval_unchecked(&self, z: Complex64, w: Complex64) -> Complex64 {
        let b = match self.degree_box() {
            None => return Complex64::new(0.0, 0.0),
            Some(b) => b,
        };
        let zp = powers(z, b.zmin, b.zmax);
        let wp = powers(w, b.wmin, b.wmax);
        let mut s = Complex64::new(0.0, 0.0);
        for (&(i, j), &c) in &self.terms {
            s += c * zp[(i - b.zmin) as usize] * wp[(j - b.wmin) as usize];
        }
        s
    }

    /// Evaluate at `(e^{i pi r}, e^{i pi s})`.
    pub fn eval_phase(&self, r: f64, s: f64) -> Complex64 {
        self.eval_unchecked(Complex64::from_polar(1.0, PI * r), Complex64::from_polar(1.0, PI * s))
    }

    /// `order`-th partial derivative in one variable.
    pub fn partial(&self, var: Var, order: u32) -> Self {
        Self::from_terms(self.terms.iter().filter_map(|(&(i, j), &c)| {
            let e = if var == Var::Z { i } else { j };
            let mut f = 1.0;
            for t in 0..order as i32 {
                f *= (e - t) as f64;
            }
            if f == 0.0 {
                return None;
            }
            let (ni, nj) = if var == Var::Z { (i - order as i32, j) } else { (i, j - order as i32) };
            Some((ni, nj, c * f))
        }))
    }

    /// Apply the Euler operator `z d/dz` (or `w d/dw`).
    pub fn euler(&self, var: Var) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(i, j), &c)| {
            let e = if var == Var::Z { i } else { j };
            (i, j, c * e as f64)
        }))
    }

    /// `p(1/z, 1/w)`.
    pub fn reflect(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(i, j), &c)| (-i, -j, c)))
    }

    /// Coefficientwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(i, j), &c)| (i, j, c.conj())))
    }

    /// `p(a z, b w)`.
    pub fn scale_vars(&self, a: Complex64, b: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(i, j), &c)| (i, j, c * a.powi(i) * b.powi(j))))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for (&(i, j), &c) in &self.terms {
            for (&(k, l), &d) in &other.terms {
                out.push((i + k, j + l, c * d));
            }
        }
        Self::from_terms(out)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|(&(i, j), &c)| (i, j, c * s)))
    }

    /// Drop terms with modulus below `rel * max_abs_coeff`.
    pub fn pruned(&self, rel: f64) -> Self {
        let cut = rel * self.max_abs_coeff();
        Self::from_terms(self.terms.iter().filter(|(_, c)| c.norm() >= cut).map(|(&(i, j), &c)| (i, j, c)))
    }

    /// Coefficients in the chosen variable with the other fixed, lowest exponent first.
    /// Returns `(lowest exponent, coefficients)`.
    pub fn slice(&self, var: Var, other: Complex64) -> (i32, Vec<Complex64>) {
        let b = match self.degree_box() {
            None => return (0, vec![]),
            Some(b) => b,
        };
        let (lo, hi, olo, ohi) = match var {
            Var::W => (b.wmin, b.wmax, b.zmin, b.zmax),
            Var::Z => (b.zmin, b.zmax, b.wmin, b.wmax),
        };
        let op = powers(other, olo, ohi);
        let mut c = vec![Complex64::new(0.0, 0.0); (hi - lo + 1) as usize];
        for (&(i, j), &v) in &self.terms {
            let (e, oe) = if var == Var::W { (j, i) } else { (i, j) };
            c[(e - lo) as usize] += v * op[(oe - olo) as usize];
        }
        (lo, c)
    }

    /// Recover a polynomial from black-box samples on the torus.
    ///
    /// Samples on a `(2Bz+1) x (2Bw+1)` grid of roots of unity, inverts the
    /// discrete Fourier transform, prunes small coefficients, then checks the
    /// result at off-grid points; a mismatch there means the true degree
    /// exceeds the bound.
    pub fn from_evaluator<F>(f: F, bz: u32, bw: u32) -> Result<Self>
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync + Send,
    {
        let nz = 2 * bz as usize + 1;
        let nw = 2 * bw as usize + 1;
        let grid: Vec<Complex64> = par::map_range(nz * nw, |idx| {
            let (p, q) = (idx / nw, idx % nw);
            f(root_of_unity(p, nz), root_of_unity(q, nw))
        });
        let scale = grid.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut terms = Vec::new();
        for a in -(bz as i32)..=(bz as i32) {
            for b in -(bw as i32)..=(bw as i32) {
                let mut s = Complex64::new(0.0, 0.0);
                for p in 0..nz {
                    let zp = root_of_unity(p, nz).powi(-a);
                    let mut row = Complex64::new(0.0, 0.0);
                    for q in 0..nw {
                        row += grid[p * nw + q] * root_of_unity(q, nw).powi(-b);
                    }
                    s += row * zp;
                }
                terms.push((a, b, s / (nz * nw) as f64));
            }
        }
        let poly = Self::from_terms(terms).pruned(PRUNE_REL);
        let probes = [(0.3131, 0.7272), (1.1, -0.417), (-2.03, 2.71), (0.05, -1.9)];
        let mut residual = 0.0f64;
        for &(t1, t2) in &probes {
            let z = Complex64::from_polar(1.0, t1);
            let w = Complex64::from_polar(1.0, t2);
            residual = residual.max((f(z, w) - poly.eval_unchecked(z, w)).norm());
        }
        if residual > 1e-8 * scale.max(1.0) {
            return Err(Error::DegreeBoundExceeded { residual });
        }
        Ok(poly)
    }
}

fn root_of_unity(p: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * p as f64 / n as f64)
}

fn powers(x: Complex64, lo: i32, hi: i32) -> Vec<Complex64> {
    let mut out = Vec::with_capacity((hi - lo + 1).max(0) as usize);
    let mut cur = if lo >= 0 { x.powi(lo) } else { x.inv().powi(-lo) };
    for _ in lo..=hi {
        out.push(cur);
        cur *= x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn eval_and_reflect() {
        let p = LaurentPoly2::from_real_terms(&[(0, 0, 4.0), (1, 0, -1.0), (-1, 0, -1.0), (0, 2, -1.0), (0, -2, -1.0)]);
        assert!((p.eval(c(1.0), c(1.0)).unwrap() - c(0.0)).norm() < 1e-15);
        assert_eq!(p.eval(c(0.0), c(1.0)), Err(Error::ZeroArgument));
        assert_eq!(p.reflect(), p);
        let z = Complex64::new(0.3, 0.8);
        let w = Complex64::new(-1.1, 0.2);
        let direct = 4.0 - z - 1.0 / z - w * w - 1.0 / (w * w);
        assert!((p.eval(z, w).unwrap() - direct).norm() < 1e-13);
    }

    #[test]
    fn partials() {
        let p = LaurentPoly2::from_real_terms(&[(2, -1, 3.0), (0, 1, 1.0)]);
        let dz = p.partial(Var::Z, 1);
        assert_eq!(dz, LaurentPoly2::from_real_terms(&[(1, -1, 6.0)]));
        let dw2 = p.partial(Var::W, 2);
        assert_eq!(dw2, LaurentPoly2::from_real_terms(&[(2, -3, 6.0)]));
    }

    #[test]
    fn interpolation_roundtrip() {
        let p = LaurentPoly2::from_real_terms(&[(0, 0, 1.0), (1, 0, -2.5), (0, -1, 0.7), (-1, 1, 1.25)]);
        let q = LaurentPoly2::from_evaluator(|z, w| p.eval_unchecked(z, w), 1, 1).unwrap();
        for ((k, a), (l, b)) in p.terms().zip(q.terms()) {
            assert_eq!(k, l);
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolation_detects_low_bound() {
        let p = LaurentPoly2::from_real_terms(&[(0, 0, 1.0), (3, 0, 1.0)]);
        let r = LaurentPoly2::from_evaluator(|z, w| p.eval_unchecked(z, w), 1, 1);
        assert!(matches!(r, Err(Error::DegreeBoundExceeded { .. })));
    }

    #[test]
    fn slices() {
        let p = LaurentPoly2::from_real_terms(&[(0, 0, 1.0), (1, 0, -1.0), (0, 1, -1.0)]);
        let (lo, cs) = p.slice(Var::W, c(2.0));
        assert_eq!(lo, 0);
        assert_eq!(cs, vec![c(-1.0), c(-1.0)]);
    }
}
