//! Toric quotients `Z^2 / Z^2 E` and their residue systems.

use crate::error::{Error, Result};

/// An integer matrix `E = [[u, v], [x, y]]` with positive determinant, whose rows
/// span the sublattice quotiented out, together with its residue system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusSpec {
    e: [[i64; 2]; 2],
    det: i64,
    // Hermite normal form basis: (a, 0) and (b, g)
    a: i64,
    b: i64,
    g: i64,
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        // g = x b + y (a mod b) = x b + y (a - (a div b) b)
        (g, y, x - a.div_euclid(b) * y)
    }
}

impl TorusSpec {
    pub fn new(e: [[i64; 2]; 2]) -> Result<Self> {
        let [[u, v], [x, y]] = e;
        let det = u * y - v * x;
        if det <= 0 {
            return Err(Error::BadTorus(format!("det E = {det} must be positive")));
        }
        let (g, al, be) = ext_gcd(v, y);
        if g == 0 {
            return Err(Error::BadTorus("E is singular".into()));
        }
        debug_assert_eq!(al * v + be * y, g);
        let a = det / g;
        let b = (al * u + be * x).rem_euclid(a);
        Ok(TorusSpec { e, det, a, b, g })
    }

    /// `E = [[u, v], [x, y]]` from its four entries.
    pub fn from_entries(u: i64, v: i64, x: i64, y: i64) -> Result<Self> {
        Self::new([[u, v], [x, y]])
    }

    pub fn identity() -> Self {
        Self::new([[1, 0], [0, 1]]).expect("identity")
    }

    pub fn diag(m: i64, n: i64) -> Result<Self> {
        Self::new([[m, 0], [0, n]])
    }

    pub fn e(&self) -> [[i64; 2]; 2] {
        self.e
    }

    pub fn det(&self) -> i64 {
        self.det
    }

    /// The transposed torus `Z^2 / Z^2 E^T`.
    pub fn transpose(&self) -> Self {
        let [[u, v], [x, y]] = self.e;
        Self::new([[u, x], [v, y]]).expect("transpose has the same determinant")
    }

    /// Residue representatives `(i, j)`, `0 <= i < a`, `0 <= j < g`, in lexicographic order.
    pub fn residues(&self) -> Vec<[i64; 2]> {
        let mut out = Vec::with_capacity(self.det as usize);
        for i in 0..self.a {
            for j in 0..self.g {
                out.push([i, j]);
            }
        }
        out
    }

    /// Reduce a cell: returns the residue index and the E-coordinates `(a, b)` with
    /// `p = residue + a (u, v) + b (x, y)`.
    pub fn reduce(&self, p: [i64; 2]) -> (usize, [i64; 2]) {
        let q = p[1].div_euclid(self.g);
        let j = p[1] - q * self.g;
        let i = (p[0] - q * self.b).rem_euclid(self.a);
        let d = [p[0] - i, p[1] - j];
        let [[u, v], [x, y]] = self.e;
        let ca = d[0] * y - d[1] * x;
        let cb = -d[0] * v + d[1] * u;
        debug_assert!(ca % self.det == 0 && cb % self.det == 0);
        ((i * self.g + j) as usize, [ca / self.det, cb / self.det])
    }

    /// `E^{-1}` applied to a real row vector: `p E^{-1}`.
    pub fn inv_apply(&self, p: [f64; 2]) -> [f64; 2] {
        let [[u, v], [x, y]] = self.e;
        let d = self.det as f64;
        [(p[0] * y as f64 - p[1] * x as f64) / d, (-p[0] * v as f64 + p[1] * u as f64) / d]
    }
}
