//! Kasteleyn matrices of toric quotients and the partition functions built from them.

use crate::charpoly::{self, CharPoly, CriticalityClass};
use crate::error::{Error, Result};
use crate::lattice::{self, Color, FundamentalDomain};
use crate::laurent::LaurentPoly2;
use crate::linalg::{self, LogValue, PolarLog};
use crate::par;
use crate::special_fn::Window;
use crate::torus::TorusSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Largest `k det E` accepted by the dense path.
pub const DENSE_CAP: usize = 4096;
/// Above this size [`Method::Auto`] switches to the product formula.
pub const AUTO_DENSE_LIMIT: usize = 1024;
/// Largest `k det E` accepted by brute-force enumeration.
pub const ENUMERATION_CAP: usize = 40;

/// The four sign choices `(1,1), (1,-1), (-1,1), (-1,-1)` for `(zeta, xi)`.
pub const SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// Rows map the signed Pfaffian vector `(-Pf(1,1), Pf(1,-1), Pf(-1,1), Pf(-1,-1))`
/// to four times the sectors `(Z00, Z10, Z01, Z11)`; the matrix is its own inverse up to 4.
pub const S: [[f64; 4]; 4] = [
    [-1.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0, -1.0],
];

fn check_dim(d: &FundamentalDomain, t: &TorusSpec, cap: usize) -> Result<usize> {
    let n = d.k() * t.det() as usize;
    if n > cap {
        return Err(Error::DimensionCap { dim: n, cap });
    }
    Ok(n)
}

/// `K_E(zeta, xi)` on the lifted vertex set (index `residue * k + v`).
pub fn build_ke(d: &FundamentalDomain, t: &TorusSpec, zeta: Complex64, xi: Complex64) -> Result<DMatrix<Complex64>> {
    let n = check_dim(d, t, DENSE_CAP)?;
    let g = lattice::lift(d, t);
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for e in &g.edges {
        let f = zeta.powi(e.winding[0] as i32) * xi.powi(e.winding[1] as i32);
        let c = e.sign as f64 * e.weight;
        m[(e.tail, e.head)] += c * f;
        m[(e.head, e.tail)] -= c / f;
    }
    Ok(m)
}

/// Row-major real `K_E(s1, s2)` for `s1, s2` in `{1, -1}`.
pub fn build_ke_real(d: &FundamentalDomain, t: &TorusSpec, s1: f64, s2: f64) -> Result<Vec<f64>> {
    let n = check_dim(d, t, DENSE_CAP)?;
    let g = lattice::lift(d, t);
    let mut m = vec![0.0; n * n];
    for e in &g.edges {
        let f = s1.powi(e.winding[0] as i32) * s2.powi(e.winding[1] as i32);
        let c = e.sign as f64 * e.weight * f;
        m[e.tail * n + e.head] += c;
        m[e.head * n + e.tail] -= c;
    }
    Ok(m)
}

/// Black-to-white block `k_E(zeta, xi)`.
pub fn build_ke_bipartite(d: &FundamentalDomain, t: &TorusSpec, zeta: Complex64, xi: Complex64) -> Result<DMatrix<Complex64>> {
    let colors = d.colors().ok_or(Error::NotBipartite)?;
    let full = build_ke(d, t, zeta, xi)?;
    let n = full.nrows();
    let k = d.k();
    let b: Vec<usize> = (0..n).filter(|i| colors[i % k] == Color::Black).collect();
    let w: Vec<usize> = (0..n).filter(|i| colors[i % k] == Color::White).collect();
    Ok(DMatrix::from_fn(b.len(), w.len(), |i, j| full[(b[i], w[j])]))
}

/// The sign `c` in `Pf K_E = c det k_E`.
pub fn pf_det_constant(d: &FundamentalDomain, t: &TorusSpec) -> Result<f64> {
    let colors = d.colors().ok_or(Error::NotBipartite)?;
    let k = d.k();
    let n = k * t.det() as usize;
    // inversions of the sequence (blacks in order, whites in order)
    let mut inv = 0usize;
    let mut blacks_after = (0..n).filter(|i| colors[i % k] == Color::Black).count();
    for i in 0..n {
        if colors[i % k] == Color::Black {
            blacks_after -= 1;
        } else {
            inv += blacks_after;
        }
    }
    let b = n / 2;
    let e = inv + b * (b.saturating_sub(1)) / 2;
    Ok(if e % 2 == 0 { 1.0 } else { -1.0 })
}

/// Dense Pfaffians of `K_E` at the four sign choices.
pub fn dense_pfaffians(d: &FundamentalDomain, t: &TorusSpec) -> Result<[PolarLog<f64>; 4]> {
    let n = check_dim(d, t, DENSE_CAP)?;
    if n % 2 == 1 {
        return Ok([PolarLog::zero(); 4]);
    }
    let mut out = [PolarLog::zero(); 4];
    for (i, &(s1, s2)) in SIGNS.iter().enumerate() {
        let mut m = build_ke_real(d, t, s1, s2)?;
        out[i] = linalg::pfaffian_rowmajor(&mut m, n);
    }
    Ok(out)
}

/// How [`sector_table`] evaluates the four Pfaffians.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Auto,
    Dense,
    /// Product formula plus the sign rule of the criticality class.
    Fast,
}

/// Sector partition functions of one torus, all in log form.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorTable {
    /// `Pf K_E` at `(1,1), (1,-1), (-1,1), (-1,-1)`.
    pub pf: [PolarLog<f64>; 4],
    /// `Z00, Z10, Z01, Z11`.
    pub sectors: [LogValue; 4],
    pub z: LogValue,
    pub method: Method,
    /// Most negative raw sector value relative to `Z`, before clamping at zero.
    pub min_sector_ratio: f64,
}

impl SectorTable {
    fn from_pf(pf: [PolarLog<f64>; 4], method: Method) -> Self {
        let v = signed_vector(&pf);
        let quarter: Vec<[f64; 4]> = S.iter().map(|r| r.map(|x| x / 4.0)).collect();
        let mut coeffs: Vec<&[f64]> = quarter.iter().map(|r| r.as_slice()).collect();
        let half = [0.5f64; 4];
        coeffs.push(&half);
        let (scale, vals) = linalg::log_linear_combination(&v, &coeffs);
        let zv = vals[4];
        let mut min_ratio = 0.0f64;
        let mut sectors = [LogValue::Zero; 4];
        for i in 0..4 {
            let r = if zv > 0.0 { vals[i] / zv } else { 0.0 };
            min_ratio = min_ratio.min(r);
            sectors[i] = if vals[i] > 1e-12 * zv.abs() { LogValue::Log(vals[i].ln() + scale) } else { LogValue::Zero };
        }
        let z = if zv > 0.0 { LogValue::Log(zv.ln() + scale) } else { LogValue::Zero };
        SectorTable { pf, sectors, z, method, min_sector_ratio: min_ratio }
    }

    /// Plain sector values (may overflow for large tori).
    pub fn sector_values(&self) -> [f64; 4] {
        self.sectors.map(|s| s.value())
    }

    /// Double-dimer sectors `ZZ^{rs} = sum_{r's'} Z^{r's'} Z^{r'+r, s'+s}`, in log form.
    pub fn double_dimer(&self) -> [LogValue; 4] {
        let scale = self.sectors.iter().filter_map(|s| s.log()).fold(f64::NEG_INFINITY, f64::max);
        if !scale.is_finite() {
            return [LogValue::Zero; 4];
        }
        let v: Vec<f64> = self.sectors.iter().map(|s| s.log().map_or(0.0, |l| (l - scale).exp())).collect();
        // index = r + 2 s in the order 00, 10, 01, 11
        let mut out = [LogValue::Zero; 4];
        for rs in 0..4 {
            let mut acc = 0.0;
            for a in 0..4 {
                acc += v[a] * v[a ^ rs];
            }
            out[rs] = if acc > 0.0 { LogValue::Log(acc.ln() + 2.0 * scale) } else { LogValue::Zero };
        }
        out
    }
}

/// `(-Pf(1,1), Pf(1,-1), Pf(-1,1), Pf(-1,-1))` as (sign, log) pairs.
pub fn signed_vector(pf: &[PolarLog<f64>; 4]) -> Vec<(f64, f64)> {
    pf.iter()
        .enumerate()
        .map(|(i, p)| {
            let s = if i == 0 { -p.sign() } else { p.sign() };
            (s, p.log_abs)
        })
        .collect()
}

/// Sector table of `d` on the torus `t`.
pub fn sector_table(d: &FundamentalDomain, t: &TorusSpec, method: Method) -> Result<SectorTable> {
    let n = d.k() * t.det() as usize;
    if n % 2 == 1 {
        let z = [PolarLog::zero(); 4];
        return Ok(SectorTable::from_pf(z, Method::Dense));
    }
    let use_dense = match method {
        Method::Dense => true,
        Method::Fast => false,
        Method::Auto => n <= AUTO_DENSE_LIMIT,
    };
    if use_dense {
        Ok(SectorTable::from_pf(dense_pfaffians(d, t)?, Method::Dense))
    } else {
        let cp = charpoly::build(d)?;
        let class = charpoly::find_nodes(&cp, &charpoly::NodeOptions::default())?;
        fast_sector_table(&cp, &class, t)
    }
}

/// Sector table from the product formula and the class sign rule.
///
/// In every critical class the signed vector `(-Pf(1,1), Pf(1,-1), Pf(-1,1), Pf(-1,-1))`
/// is entrywise nonnegative, so only the magnitudes are needed. Gaseous
/// (non-vanishing) polynomials give no sign information and are refused.
pub fn fast_sector_table(cp: &CharPoly, class: &CriticalityClass, t: &TorusSpec) -> Result<SectorTable> {
    if matches!(class, CriticalityClass::NonVanishing) {
        return Err(Error::SignUndetermined("non-vanishing P: use the dense path".into()));
    }
    let mut pf = [PolarLog::zero(); 4];
    for (i, &(s1, s2)) in SIGNS.iter().enumerate() {
        let prod = pf_magnitude_product(cp, t, Complex64::new(s1, 0.0), Complex64::new(s2, 0.0));
        if let Some(l) = prod {
            let sign = if i == 0 { -1.0 } else { 1.0 };
            pf[i] = PolarLog { phase: sign, log_abs: l };
        }
    }
    Ok(SectorTable::from_pf(pf, Method::Fast))
}

/// Points `(z, w)` whose characteristic values multiply to `det K_E(zeta, xi)`:
/// `(r, s) = E^{-1} (phi + j, psi + k)` over residues `(j, k)` of `Z^2 / Z^2 E^T`,
/// with `z = e^{2 pi i r}`, `zeta = e^{2 pi i phi}` and likewise for `w`, `xi`.
pub fn twist_points(t: &TorusSpec, zeta: Complex64, xi: Complex64) -> Vec<(f64, f64)> {
    let phi = zeta.arg() / (2.0 * PI);
    let psi = xi.arg() / (2.0 * PI);
    let [[u, v], [x, y]] = t.e();
    let det = t.det() as f64;
    t.transpose()
        .residues()
        .into_iter()
        .map(|[j, k]| {
            let a = phi + j as f64;
            let b = psi + k as f64;
            // solve E (r, s)^T = (a, b)^T
            let r = (y as f64 * a - v as f64 * b) / det;
            let s = (-x as f64 * a + u as f64 * b) / det;
            (r, s)
        })
        .collect()
}

/// `sum log|f(z, w)|` over the twist points, or `None` if some factor vanishes.
fn log_abs_product(poly: &LaurentPoly2, t: &TorusSpec, zeta: Complex64, xi: Complex64) -> Option<f64> {
    let tol = 1e-10 * poly.terms().map(|(_, c)| c.norm()).sum::<f64>();
    let pts = twist_points(t, zeta, xi);
    let logs = par::map_slice(&pts, |&(r, s)| {
        let v = poly.eval_phase(2.0 * r, 2.0 * s).norm();
        (v > tol).then(|| v.ln())
    });
    let mut acc = 0.0;
    for l in logs {
        acc += l?;
    }
    Some(acc)
}

/// `log|Pf K_E(zeta, xi)|` by the product formula, or `None` when it vanishes.
pub fn pf_magnitude_product(cp: &CharPoly, t: &TorusSpec, zeta: Complex64, xi: Complex64) -> Option<f64> {
    match cp.q() {
        Some(q) => log_abs_product(q, t, zeta, xi),
        None => log_abs_product(cp.p(), t, zeta, xi).map(|l| 0.5 * l),
    }
}

/// `c prod Q(z, w)` with its phase, for bipartite domains: the exact `Pf K_E(zeta, xi)`.
pub fn pf_product_bipartite(d: &FundamentalDomain, cp: &CharPoly, t: &TorusSpec, zeta: Complex64, xi: Complex64) -> Result<PolarLog<Complex64>> {
    let q = cp.q().ok_or(Error::NotBipartite)?;
    let c = pf_det_constant(d, t)?;
    let pts = twist_points(t, zeta, xi);
    let vals = par::map_slice(&pts, |&(r, s)| q.eval_phase(2.0 * r, 2.0 * s));
    let mut out = PolarLog { phase: Complex64::new(c, 0.0), log_abs: 0.0 };
    for v in vals {
        let m = v.norm();
        if m == 0.0 {
            return Ok(PolarLog::zero());
        }
        out = out.mul(PolarLog { phase: v / m, log_abs: m.ln() });
    }
    Ok(out)
}

/// Brute-force census of the perfect matchings of a small torus.
#[derive(Clone, Debug, PartialEq)]
pub struct Enumeration {
    pub count: usize,
    pub z: f64,
    /// `Z00, Z10, Z01, Z11`.
    pub sectors: [f64; 4],
    /// Pfaffians at `(1,1), (1,-1), (-1,1), (-1,-1)` from signed matching sums.
    pub pf: [f64; 4],
    /// Weight by black-to-white winding, bipartite domains only.
    pub windings: Option<BTreeMap<[i64; 2], f64>>,
}

/// Enumerate all perfect matchings of the lift of `d` to `t`.
pub fn enumerate_matchings(d: &FundamentalDomain, t: &TorusSpec) -> Result<Enumeration> {
    let g = lattice::lift(d, t);
    let colors = d.colors();
    let mut out = Enumeration {
        count: 0,
        z: 0.0,
        sectors: [0.0; 4],
        pf: [0.0; 4],
        windings: colors.map(|_| BTreeMap::new()),
    };
    lattice::for_each_matching(&g, colors, d.k(), ENUMERATION_CAP, |m| {
        out.count += 1;
        out.z += m.weight;
        out.sectors[m.sector[0] as usize + 2 * m.sector[1] as usize] += m.weight;
        for (i, &(s1, s2)) in SIGNS.iter().enumerate() {
            let f = s1.powi(m.sector[0] as i32) * s2.powi(m.sector[1] as i32);
            out.pf[i] += m.pf_sign as f64 * m.weight * f;
        }
        if let (Some(w), Some(wd)) = (m.winding, out.windings.as_mut()) {
            *wd.entry(w).or_insert(0.0) += m.weight;
        }
    })?;
    Ok(out)
}

/// How [`winding_distribution`] evaluates the twisted determinants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindingMethod {
    /// LU of `k_E` at every grid point.
    Dense,
    /// Product of `Q` over the twist points.
    Product,
}

/// Exact winding probabilities on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindingTable {
    pub window: Window,
    pub probs: Vec<([i64; 2], f64)>,
    pub grid: usize,
}

impl WindingTable {
    pub fn get(&self, e: [i64; 2]) -> f64 {
        self.probs.iter().find(|p| p.0 == e).map_or(0.0, |p| p.1)
    }
    pub fn mass(&self) -> f64 {
        self.probs.iter().map(|p| p.1).sum()
    }
}

/// Distribution of the black-to-white winding of a uniform-weight matching.
///
/// Uses `Z(theta) = (-D(theta;1,1) + D(theta;1,-1) + D(theta;-1,1) + D(theta;-1,-1)) / 2`
/// with `D(theta; s1, s2) = Pf K_E(s1 e^{i theta1}, s2 e^{i theta2})`, sampled on an
/// `m x m` grid and inverted by a discrete Fourier transform. Windows wider than
/// `m` alias.
pub fn winding_distribution(
    d: &FundamentalDomain,
    t: &TorusSpec,
    window: Window,
    m: usize,
    method: WindingMethod,
) -> Result<WindingTable> {
    if !d.is_bipartite() {
        return Err(Error::NotBipartite);
    }
    if window.hi[0] - window.lo[0] >= m as i64 || window.hi[1] - window.lo[1] >= m as i64 {
        return Err(Error::Window(format!("window wider than the {m}-point grid")));
    }
    let c = pf_det_constant(d, t)?;
    let cp = match method {
        WindingMethod::Product => Some(charpoly::build(d)?),
        WindingMethod::Dense => {
            check_dim(d, t, DENSE_CAP)?;
            None
        }
    };
    let grid: Vec<(usize, usize, usize)> =
        (0..m).flat_map(|p| (0..m).flat_map(move |q| (0..4).map(move |s| (p, q, s)))).collect();
    let vals: Vec<Result<PolarLog<Complex64>>> = par::map_slice(&grid, |&(p, q, s)| {
        let (s1, s2) = SIGNS[s];
        let zeta = Complex64::from_polar(s1, 2.0 * PI * p as f64 / m as f64);
        let xi = Complex64::from_polar(s2, 2.0 * PI * q as f64 / m as f64);
        match &cp {
            Some(cp) => pf_product_bipartite(d, cp, t, zeta, xi),
            None => {
                let k = build_ke_bipartite(d, t, zeta, xi)?;
                let mut v = linalg::det_log(&k);
                v.phase *= c;
                Ok(v)
            }
        }
    });
    let vals: Vec<PolarLog<Complex64>> = vals.into_iter().collect::<Result<_>>()?;
    let scale = vals.iter().filter(|v| !v.is_zero()).map(|v| v.log_abs).fold(f64::NEG_INFINITY, f64::max);
    let coef = [-0.5, 0.5, 0.5, 0.5];
    let mut zt = vec![Complex64::new(0.0, 0.0); m * m];
    for (idx, &(p, q, s)) in grid.iter().enumerate() {
        let v = vals[idx];
        if !v.is_zero() {
            zt[p * m + q] += coef[s] * v.phase * (v.log_abs - scale).exp();
        }
    }
    let z0 = zt[0].re;
    if !(z0 > 0.0) {
        return Err(Error::SignUndetermined("Z(0) is not positive".into()));
    }
    let probs = window
        .points()
        .into_iter()
        .map(|e| {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..m {
                for q in 0..m {
                    let ang = -2.0 * PI * ((p as i64 * e[0]) as f64 + (q as i64 * e[1]) as f64) / m as f64;
                    acc += zt[p * m + q] * Complex64::from_polar(1.0, ang);
                }
            }
            (e, acc.re / (m * m) as f64 / z0)
        })
        .collect();
    Ok(WindingTable { window, probs, grid: m })
}
