//! Characteristic polynomials `P = det K(z, w)` and `Q = det k(z, w)`: zeros on the
//! unit torus, node Hessians, the free energy and the Ronkin function.

use crate::error::{Error, Result};
use crate::lattice::{self, FundamentalDomain};
use crate::laurent::{LaurentPoly2, Var};
use crate::linalg;
use crate::par;
use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

/// `P` and, for bipartite domains, its factor `Q` with `P = Q(z,w) Q(1/z,1/w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharPoly {
    p: LaurentPoly2,
    q: Option<LaurentPoly2>,
    k: usize,
}

impl CharPoly {
    pub fn from_p(p: LaurentPoly2, k: usize) -> Self {
        CharPoly { p, q: None, k }
    }

    /// Builds `P` as `Q(z,w) Q(1/z,1/w)`.
    pub fn from_q(q: LaurentPoly2, k: usize) -> Self {
        let p = q.mul(&q.reflect());
        CharPoly { p, q: Some(q), k }
    }

    pub fn p(&self) -> &LaurentPoly2 {
        &self.p
    }
    pub fn q(&self) -> Option<&LaurentPoly2> {
        self.q.as_ref()
    }
    pub fn k(&self) -> usize {
        self.k
    }
}

fn realify(p: LaurentPoly2) -> LaurentPoly2 {
    LaurentPoly2::from_terms(p.terms().map(|((i, j), c)| (i, j, Complex64::new(c.re, 0.0))))
        .pruned(crate::laurent::PRUNE_REL)
}

/// Degree bounds of a determinant whose rows are the listed vertices.
fn degree_bounds(d: &FundamentalDomain, rows: &[usize]) -> (u32, u32) {
    let mut m = vec![[0i64; 2]; d.k()];
    for e in d.edges() {
        for v in [e.tail, e.head] {
            m[v][0] = m[v][0].max(e.offset[0].abs());
            m[v][1] = m[v][1].max(e.offset[1].abs());
        }
    }
    let bz: i64 = rows.iter().map(|&v| m[v][0]).sum();
    let bw: i64 = rows.iter().map(|&v| m[v][1]).sum();
    (bz.max(1) as u32, bw.max(1) as u32)
}

/// Interpolate `P` (and `Q` when a bipartition exists) from `K(z, w)`.
pub fn build(d: &FundamentalDomain) -> Result<CharPoly> {
    let rep = lattice::verify_orientation(d);
    if !rep.is_oriented() {
        return Err(Error::Orientation(rep.offending.join("; ")));
    }
    let all: Vec<usize> = (0..d.k()).collect();
    let (bz, bw) = degree_bounds(d, &all);
    let p = realify(LaurentPoly2::from_evaluator(|z, w| lattice::det_k(d, z, w), bz, bw)?);
    let q = match d.color_classes() {
        Some((blacks, whites)) => {
            let (bz, bw) = degree_bounds(d, &blacks);
            let f = |z: Complex64, w: Complex64| {
                let full = d.k_matrix(z, w);
                linalg::det(&DMatrix::from_fn(blacks.len(), whites.len(), |i, j| full[(blacks[i], whites[j])]))
            };
            Some(realify(LaurentPoly2::from_evaluator(f, bz, bw)?))
        }
        None => None,
    };
    Ok(CharPoly { p, q, k: d.k() })
}

/// Knobs of the zero search on the unit torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeOptions {
    /// Grid points per axis of the initial scan.
    pub grid: usize,
    /// Grid minima below `candidate_tol * max P` are refined by Newton's method.
    pub candidate_tol: f64,
    /// A refined point counts as a zero when `P <= node_tol * max P`.
    pub node_tol: f64,
}

impl Default for NodeOptions {
    fn default() -> Self {
        NodeOptions { grid: 256, candidate_tol: 1e-2, node_tol: 1e-8 }
    }
}

/// How a node arises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    RealNode,
    ConjugatePairMember,
    RealRootOfQNode,
}

/// A positive node `(z0, w0) = (e^{i pi r}, e^{i pi s})` and its Hessian.
///
/// `H` is normalised so that `P(e^{i pi (r0+r)}, e^{i pi (s0+s)}) = pi^2 <(r,s), H (r,s)> + ...`;
/// for a real node of `Q` it is read from the expansion of `Q` instead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeReport {
    pub z: Complex64,
    pub w: Complex64,
    pub r: f64,
    pub s: f64,
    /// `[[A_z, B], [B, A_w]]`.
    pub hessian: [[f64; 2]; 2],
    /// `sqrt(A_z A_w - B^2)`.
    pub d: f64,
    /// `(-B + i D) / A_w`.
    pub tau: Complex64,
    pub kind: NodeKind,
    /// A zero of a non-bipartite `P` away from `(+-1, +-1)`.
    pub outside_conjectured: bool,
}

impl NodeReport {
    fn new(r: f64, s: f64, h: [[f64; 2]; 2], kind: NodeKind, bipartite: bool) -> Result<Self> {
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(h[0][0] > 0.0 && h[1][1] > 0.0 && det > 0.0) {
            return Err(Error::Unclassifiable(format!("Hessian {h:?} at ({r}, {s}) is not positive definite")));
        }
        let d = det.sqrt();
        let real = is_real_phase(r) && is_real_phase(s);
        Ok(NodeReport {
            z: Complex64::from_polar(1.0, PI * r),
            w: Complex64::from_polar(1.0, PI * s),
            r,
            s,
            hessian: h,
            d,
            tau: Complex64::new(-h[0][1], d) / h[1][1],
            kind,
            outside_conjectured: !bipartite && !real,
        })
    }

    pub fn det_h(&self) -> f64 {
        self.d * self.d
    }
}

fn is_real_phase(r: f64) -> bool {
    r == 0.0 || r == 1.0
}

/// Map to `(-1, 1]`.
fn wrap(x: f64) -> f64 {
    let y = x - 2.0 * ((x + 1.0) / 2.0).floor();
    if y == -1.0 {
        1.0
    } else {
        y
    }
}

fn torus_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = |x: f64, y: f64| {
        let t = (x - y).rem_euclid(2.0);
        t.min(2.0 - t)
    };
    d(a.0, b.0).hypot(d(a.1, b.1))
}

/// Zero pattern of `P` on the unit torus; decides which finite-size correction applies.
#[derive(Clone, Debug, PartialEq)]
pub enum CriticalityClass {
    NonVanishing,
    SingleRealNode(NodeReport),
    DistinctConjugateNodes([NodeReport; 2]),
    RealRootOfQ(NodeReport),
    TwoRealNodes([NodeReport; 2]),
}

impl CriticalityClass {
    pub fn label(&self) -> &'static str {
        match self {
            CriticalityClass::NonVanishing => "non-vanishing",
            CriticalityClass::SingleRealNode(_) => "single-real-node",
            CriticalityClass::DistinctConjugateNodes(_) => "distinct-conjugate-nodes",
            CriticalityClass::RealRootOfQ(_) => "real-root-of-Q",
            CriticalityClass::TwoRealNodes(_) => "two-real-nodes",
        }
    }

    pub fn nodes(&self) -> &[NodeReport] {
        match self {
            CriticalityClass::NonVanishing => &[],
            CriticalityClass::SingleRealNode(n) | CriticalityClass::RealRootOfQ(n) => std::slice::from_ref(n),
            CriticalityClass::DistinctConjugateNodes(n) | CriticalityClass::TwoRealNodes(n) => n,
        }
    }
}

/// A real-valued trigonometric polynomial in `(r, s)` with its derivatives.
struct TorusFn {
    p: LaurentPoly2,
    pz: LaurentPoly2,
    pw: LaurentPoly2,
    pzz: LaurentPoly2,
    pzw: LaurentPoly2,
    pww: LaurentPoly2,
}

impl TorusFn {
    fn new(p: &LaurentPoly2) -> Self {
        let pz = p.euler(Var::Z);
        let pw = p.euler(Var::W);
        TorusFn { pzz: pz.euler(Var::Z), pzw: pz.euler(Var::W), pww: pw.euler(Var::W), p: p.clone(), pz, pw }
    }

    fn value(&self, r: f64, s: f64) -> f64 {
        self.p.eval_phase(r, s).re
    }

    /// Value, gradient and Hessian in `(r, s)`.
    fn local(&self, r: f64, s: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let ip = Complex64::new(0.0, PI);
        let f = self.p.eval_phase(r, s).re;
        let g = [(ip * self.pz.eval_phase(r, s)).re, (ip * self.pw.eval_phase(r, s)).re];
        let c = -PI * PI;
        let hzw = c * self.pzw.eval_phase(r, s).re;
        let h = [[c * self.pzz.eval_phase(r, s).re, hzw], [hzw, c * self.pww.eval_phase(r, s).re]];
        (f, g, h)
    }

    /// Damped Newton descent towards a local minimum.
    fn refine(&self, start: (f64, f64), scale: f64) -> (f64, f64) {
        let (mut r, mut s) = start;
        let mut lam = 0.0;
        for _ in 0..300 {
            let (f, g, h) = self.local(r, s);
            let gn = g[0].hypot(g[1]);
            if gn <= 1e-13 * scale || f <= 0.0 {
                break;
            }
            let hn = h[0][0].abs() + h[1][1].abs() + h[0][1].abs();
            let mut moved = false;
            for _ in 0..60 {
                let a = [[h[0][0] + lam, h[0][1]], [h[1][0], h[1][1] + lam]];
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                let pd = a[0][0] > 0.0 && det > 0.0;
                if pd {
                    let dr = -(a[1][1] * g[0] - a[0][1] * g[1]) / det;
                    let ds = -(-a[1][0] * g[0] + a[0][0] * g[1]) / det;
                    if dr.hypot(ds) < 1e-17 {
                        return (wrap(r), wrap(s));
                    }
                    if self.value(r + dr, s + ds) < f {
                        r += dr;
                        s += ds;
                        lam /= 4.0;
                        moved = true;
                        break;
                    }
                }
                lam = if lam == 0.0 { 1e-6 * hn.max(gn).max(1e-300) } else { lam * 4.0 };
            }
            if !moved {
                break;
            }
        }
        (wrap(r), wrap(s))
    }

    fn hessian(&self, r: f64, s: f64) -> [[f64; 2]; 2] {
        let h = self.local(r, s).2;
        let c = 0.5 / (PI * PI);
        [[c * h[0][0], c * h[0][1]], [c * h[1][0], c * h[1][1]]]
    }
}

/// A zero of a nonnegative trigonometric polynomial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusZero {
    pub r: f64,
    pub s: f64,
    pub value: f64,
}

/// Isolated zeros of a polynomial that is real and nonnegative on the unit torus.
///
/// Returns `(max on the grid, zeros)`.
pub fn torus_zeros(p: &LaurentPoly2, opts: &NodeOptions) -> (f64, Vec<TorusZero>) {
    let n = opts.grid.max(8);
    let tf = TorusFn::new(p);
    let coord = |i: usize| -1.0 + 2.0 * (i + 1) as f64 / n as f64;
    let vals: Vec<f64> = par::map_range(n * n, |idx| tf.value(coord(idx / n), coord(idx % n)));
    let scale = vals.iter().cloned().fold(0.0, f64::max);
    if scale <= 0.0 {
        return (scale, vec![]);
    }
    let at = |i: isize, j: isize| vals[(i.rem_euclid(n as isize) as usize) * n + j.rem_euclid(n as isize) as usize];
    let mut cands = Vec::new();
    for i in 0..n as isize {
        for j in 0..n as isize {
            let v = at(i, j);
            if v > opts.candidate_tol * scale {
                continue;
            }
            let mut is_min = true;
            'nb: for di in -1..=1 {
                for dj in -1..=1 {
                    if (di, dj) != (0, 0) && at(i + di, j + dj) < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                cands.push((coord(i as usize), coord(j as usize)));
            }
        }
    }
    let refined = par::map_slice(&cands, |&c| {
        let (mut r, mut s) = tf.refine(c, scale);
        let v = tf.value(r, s).max(0.0);
        // snap to the nearest real phase when that is at least as good
        let snap = |x: f64| if x.abs() < 1e-3 { 0.0 } else if (1.0 - x.abs()) < 1e-3 { 1.0 } else { x };
        let (sr, ss) = (snap(r), snap(s));
        if (sr, ss) != (r, s) {
            let vs = tf.value(sr, ss).max(0.0);
            if vs <= 10.0 * v.max(1e-15 * scale) {
                r = sr;
                s = ss;
                return TorusZero { r, s, value: vs };
            }
        }
        TorusZero { r, s, value: v }
    });
    let mut out: Vec<TorusZero> = Vec::new();
    for z in refined {
        if z.value > opts.node_tol * scale {
            continue;
        }
        match out.iter_mut().find(|o| torus_dist((o.r, o.s), (z.r, z.s)) < 1e-3) {
            Some(o) => {
                if z.value < o.value {
                    *o = z;
                }
            }
            None => out.push(z),
        }
    }
    out.sort_by(|a, b| (a.r, a.s).partial_cmp(&(b.r, b.s)).unwrap());
    (scale, out)
}

fn hessians_agree(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> bool {
    let n = a.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).abs() <= 1e-6 * n)
}

/// Hessian of a real node of `Q`, from `Q(e^{i pi (r0+r)}, ..) = -(pi^2/2) <x, M x> + ...`.
fn q_node_hessian(q: &LaurentPoly2, r: f64, s: f64) -> Result<[[f64; 2]; 2]> {
    let qz = q.euler(Var::Z);
    let qw = q.euler(Var::W);
    let grad = qz.eval_phase(r, s).norm() + qw.eval_phase(r, s).norm();
    if grad > 1e-6 * q.max_abs_coeff() {
        return Err(Error::Unclassifiable("real zero of Q is not a node of Q".into()));
    }
    let m = [
        [qz.euler(Var::Z).eval_phase(r, s).re, qz.euler(Var::W).eval_phase(r, s).re],
        [qw.euler(Var::Z).eval_phase(r, s).re, qw.euler(Var::W).eval_phase(r, s).re],
    ];
    let sgn = if m[0][0] < 0.0 { -0.5 } else { 0.5 };
    Ok([[sgn * m[0][0], sgn * m[0][1]], [sgn * m[1][0], sgn * m[1][1]]])
}

/// Check that `P` follows its quadratic model at radius `1e-3`.
fn second_order(tf: &TorusFn, r: f64, s: f64, h: &[[f64; 2]; 2]) -> bool {
    let rad = 1e-3;
    (0..8).all(|k| {
        let a = PI * k as f64 / 4.0;
        let (dr, ds) = (rad * a.cos(), rad * a.sin());
        let model = PI * PI * (h[0][0] * dr * dr + 2.0 * h[0][1] * dr * ds + h[1][1] * ds * ds);
        let v = tf.value(r + dr, s + ds);
        (v - model).abs() <= 0.05 * model
    })
}

/// Locate and classify the zeros of `P` on the unit torus.
pub fn find_nodes(cp: &CharPoly, opts: &NodeOptions) -> Result<CriticalityClass> {
    let (scale, zeros) = torus_zeros(cp.p(), opts);
    if zeros.is_empty() {
        return Ok(CriticalityClass::NonVanishing);
    }
    if zeros.len() > 2 {
        return Err(Error::Unclassifiable(format!("{} zeros on the unit torus", zeros.len())));
    }
    let tf = TorusFn::new(cp.p());
    let bip = cp.q().is_some();
    let mut nodes = Vec::new();
    for z in &zeros {
        let h = tf.hessian(z.r, z.s);
        let hn = h.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        let real = is_real_phase(z.r) && is_real_phase(z.s);
        if hn < 1e-6 * scale {
            // fourth-order zero: only a real node of Q is understood
            let q = match cp.q() {
                Some(q) if real && zeros.len() == 1 => q,
                _ => return Err(Error::Unclassifiable(format!("degenerate zero at ({}, {})", z.r, z.s))),
            };
            let hq = q_node_hessian(q, z.r, z.s)?;
            let node = NodeReport::new(z.r, z.s, hq, NodeKind::RealRootOfQNode, true)?;
            return Ok(CriticalityClass::RealRootOfQ(node));
        }
        let kind = if real { NodeKind::RealNode } else { NodeKind::ConjugatePairMember };
        let node = match cp.q() {
            Some(q) => {
                // Newton on Q itself avoids the cancellation in P near its zero
                let (r, s) = match polish_q(q, (z.r, z.s)) {
                    Some((r, s)) if !real => (wrap(r), wrap(s)),
                    _ => (z.r, z.s),
                };
                let a = q.euler(Var::Z).eval_phase(r, s);
                let b = q.euler(Var::W).eval_phase(r, s);
                let bb = (a * b.conj()).re;
                NodeReport::new(r, s, [[a.norm_sqr(), bb], [bb, b.norm_sqr()]], kind, true)?
            }
            None => NodeReport::new(z.r, z.s, h, kind, false)?,
        };
        if !second_order(&tf, node.r, node.s, &node.hessian) {
            return Err(Error::Unclassifiable(format!("zero at ({}, {}) is not a simple node", z.r, z.s)));
        }
        nodes.push(node);
    }
    match nodes.as_slice() {
        [a] if a.kind == NodeKind::RealNode => Ok(CriticalityClass::SingleRealNode(*a)),
        [a, b] if a.kind == NodeKind::RealNode && b.kind == NodeKind::RealNode => {
            if !hessians_agree(&a.hessian, &b.hessian) {
                return Err(Error::Unclassifiable("two real nodes with different Hessians".into()));
            }
            Ok(CriticalityClass::TwoRealNodes([*a, *b]))
        }
        [a, b] if bip && torus_dist((a.r, a.s), (-b.r, -b.s)) < 1e-6 => {
            if !hessians_agree(&a.hessian, &b.hessian) {
                return Err(Error::Unclassifiable("conjugate nodes with different Hessians".into()));
            }
            Ok(CriticalityClass::DistinctConjugateNodes([*a, *b]))
        }
        _ => Err(Error::Unclassifiable(format!(
            "zero pattern {:?} outside the known classes",
            nodes.iter().map(|n| (n.r, n.s)).collect::<Vec<_>>()
        ))),
    }
}

/// Jensen data of a one-variable Laurent polynomial on the unit circle.
struct CircleData {
    /// Mean of `log|f|` over the circle.
    mahler: f64,
    /// Winding number of `f(circle)` about 0: zeros minus poles inside.
    winding: i64,
    /// Smallest `||root| - 1|`.
    gap: f64,
}

fn circle_data(lo: i32, c: &[Complex64]) -> Option<CircleData> {
    let big = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if big == 0.0 {
        return None;
    }
    let cut = 1e-13 * big;
    let first = c.iter().position(|x| x.norm() > cut)?;
    let last = c.iter().rposition(|x| x.norm() > cut)?;
    let c = &c[first..=last];
    let deg = c.len() - 1;
    let lead = c[deg];
    let mut mahler = lead.norm().ln();
    let mut inside = 0i64;
    let mut gap = f64::INFINITY;
    if deg > 0 {
        let comp = DMatrix::from_fn(deg, deg, |i, j| {
            if i == 0 {
                -c[deg - 1 - j] / lead
            } else if i == j + 1 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let roots = comp.eigenvalues()?;
        for mut x in roots.iter().copied() {
            // one Newton polish on the original polynomial
            let (mut f, mut df) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for &a in c.iter().rev() {
                df = df * x + f;
                f = f * x + a;
            }
            if df.norm() > 0.0 {
                let step = f / df;
                if step.norm() < 1e-3 * (1.0 + x.norm()) {
                    x -= step;
                }
            }
            let m = x.norm();
            gap = gap.min((m - 1.0).abs());
            if m > 1.0 {
                mahler += m.ln();
            } else {
                inside += 1;
            }
        }
    }
    Some(CircleData { mahler, winding: lo as i64 + first as i64 + inside, gap })
}

/// Breakpoints where the winding of the `w`-slice changes, located by bisection.
fn winding_breaks(poly: &LaurentPoly2, n: usize) -> Vec<f64> {
    let wind = |r: f64| {
        let (lo, c) = poly.slice(Var::W, Complex64::from_polar(1.0, PI * r));
        circle_data(lo, &c).map(|d| d.winding)
    };
    let xs: Vec<f64> = (0..=n).map(|i| -1.0 + 2.0 * i as f64 / n as f64).collect();
    let ws = par::map_slice(&xs, |&r| wind(r));
    let mut out = Vec::new();
    for i in 0..n {
        if ws[i] != ws[i + 1] {
            let (mut a, mut b) = (xs[i], xs[i + 1]);
            let wa = ws[i];
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if wind(m) == wa {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    out
}

const GL_DEGREE: usize = 24;
const PANEL: f64 = 0.125;

/// Mean of `log|poly|` over the unit torus.
///
/// The inner integral is exact by Jensen's formula; the outer one uses
/// Gauss-Legendre panels split at `breaks` (phases `r` in units of `pi`) and at
/// every jump of the slice winding number, where the integrand has kinks.
pub fn mahler_measure(poly: &LaurentPoly2, breaks: &[f64]) -> Result<f64> {
    if poly.is_zero() {
        return Err(Error::NonIntegrable("polynomial is identically zero".into()));
    }
    let mut cuts: Vec<f64> = breaks.iter().map(|&b| wrap(b)).collect();
    cuts.extend(winding_breaks(poly, 256));
    cuts.push(-1.0);
    cuts.push(1.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let rule = GaussLegendre::new(GL_DEGREE.try_into().unwrap());
    let mut pts = Vec::new();
    for win in cuts.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b - a < 1e-15 {
            continue;
        }
        let np = ((b - a) / PANEL).ceil() as usize;
        let hw = (b - a) / np as f64;
        for p in 0..np {
            let lo = a + p as f64 * hw;
            for (x, wt) in rule.iter() {
                pts.push((lo + 0.5 * hw * (x + 1.0), 0.5 * hw * wt));
            }
        }
    }
    let vals = par::map_slice(&pts, |&(r, wt)| {
        let (lo, c) = poly.slice(Var::W, Complex64::from_polar(1.0, PI * r));
        circle_data(lo, &c).map(|d| wt * d.mahler)
    });
    let mut acc = 0.0;
    for v in vals {
        acc += v.ok_or_else(|| Error::NonIntegrable("slice identically zero".into()))?;
    }
    Ok(acc / 2.0)
}

/// Free energy per fundamental domain, `f0 = m(P) / 2` (equal to `m(Q)` when bipartite).
pub fn free_energy(cp: &CharPoly) -> Result<f64> {
    let (_, zeros) = torus_zeros(cp.p(), &NodeOptions::default());
    if zeros.len() > 8 {
        return Err(Error::NonIntegrable("P vanishes along a curve".into()));
    }
    let breaks: Vec<f64> = zeros.iter().map(|z| z.r).collect();
    match cp.q() {
        Some(q) => mahler_measure(q, &breaks),
        None => Ok(0.5 * mahler_measure(cp.p(), &breaks)?),
    }
}

/// Grid sizes of [`free_energy_midpoint`].
pub const MIDPOINT_GRIDS: [usize; 3] = [128, 256, 512];

/// Mean of `log P / 2` on an `n x n` grid offset by half a cell.
pub fn midpoint_mean(cp: &CharPoly, n: usize) -> f64 {
    let tf = TorusFn::new(cp.p());
    let c = |i: usize| -1.0 + (2 * i + 1) as f64 / n as f64;
    let rows = par::map_range(n, |i| (0..n).map(|j| tf.value(c(i), c(j)).abs().ln()).sum::<f64>());
    0.5 * rows.iter().sum::<f64>() / (n * n) as f64
}

/// `f0` by offset midpoint grids and Richardson extrapolation.
///
/// The error model is `f0 + a n^-2 + b n^-2 log n`, fitted on [`MIDPOINT_GRIDS`].
pub fn free_energy_midpoint(cp: &CharPoly) -> Result<f64> {
    if cp.p().is_zero() {
        return Err(Error::NonIntegrable("P is identically zero".into()));
    }
    let f: Vec<f64> = MIDPOINT_GRIDS.iter().map(|&n| midpoint_mean(cp, n)).collect();
    let m = nalgebra::Matrix3::from_fn(|i, j| {
        let n = MIDPOINT_GRIDS[i] as f64;
        [1.0, n.powi(-2), n.powi(-2) * n.ln()][j]
    });
    let sol = m
        .lu()
        .solve(&nalgebra::Vector3::new(f[0], f[1], f[2]))
        .ok_or_else(|| Error::NonIntegrable("singular extrapolation".into()))?;
    if !sol[0].is_finite() {
        return Err(Error::NonIntegrable("log P not integrable on the grid".into()));
    }
    Ok(sol[0])
}

/// Zeros of `Q` on the unit torus, from `|Q|^2`.
fn q_torus_zeros(q: &LaurentPoly2) -> Vec<TorusZero> {
    let abs2 = q.mul(&q.conj().reflect());
    torus_zeros(&abs2, &NodeOptions::default()).1
}

/// Ronkin function `R(alpha) = mean of log|Q(e^{a_h} z, e^{a_v} w)|` over the unit torus.
pub fn ronkin(cp: &CharPoly, alpha: [f64; 2]) -> Result<f64> {
    let q = cp.q().ok_or(Error::NotBipartite)?;
    let qa = q.scale_vars(Complex64::new(alpha[0].exp(), 0.0), Complex64::new(alpha[1].exp(), 0.0));
    let breaks: Vec<f64> = q_torus_zeros(&qa).iter().map(|z| z.r).collect();
    mahler_measure(&qa, &breaks)
}

/// Newton's method for a simple zero of `q` on the unit torus, viewed as a map `R^2 -> C`.
fn polish_q(q: &LaurentPoly2, start: (f64, f64)) -> Option<(f64, f64)> {
    let qz = q.euler(Var::Z);
    let qw = q.euler(Var::W);
    let ip = Complex64::new(0.0, PI);
    let (mut r, mut s) = start;
    for _ in 0..60 {
        let v = q.eval_phase(r, s);
        let a = ip * qz.eval_phase(r, s);
        let b = ip * qw.eval_phase(r, s);
        // solve a dr + b ds = -v over the reals
        let det = a.re * b.im - a.im * b.re;
        if det.abs() < 1e-300 {
            return None;
        }
        let dr = -(v.re * b.im - v.im * b.re) / det;
        let ds = -(a.re * v.im - a.im * v.re) / det;
        r += dr;
        s += ds;
        if dr.hypot(ds) < 1e-15 {
            break;
        }
    }
    (q.eval_phase(r, s).norm() <= 1e-12 * q.max_abs_coeff()).then_some((r, s))
}

/// Follow a zero of `Q(e^{a_h} z, e^{a_v} w)` on the unit torus from `(r, s)` at `alpha = 0`.
pub fn track_root(q: &LaurentPoly2, start: (f64, f64), alpha: [f64; 2]) -> Result<(f64, f64)> {
    let steps = 8;
    let mut x = start;
    for k in 1..=steps {
        let f = k as f64 / steps as f64;
        let qa = q.scale_vars(Complex64::new((f * alpha[0]).exp(), 0.0), Complex64::new((f * alpha[1]).exp(), 0.0));
        x = polish_q(&qa, x).ok_or_else(|| Error::Unclassifiable("root tracking did not converge".into()))?;
    }
    if qa_residual(q, alpha, x.0, x.1) > 1e-9 * q.max_abs_coeff() {
        return Err(Error::Unclassifiable("root tracking did not converge".into()));
    }
    Ok((wrap(x.0), wrap(x.1)))
}

fn qa_residual(q: &LaurentPoly2, alpha: [f64; 2], r: f64, s: f64) -> f64 {
    q.scale_vars(Complex64::new(alpha[0].exp(), 0.0), Complex64::new(alpha[1].exp(), 0.0)).eval_phase(r, s).norm()
}

/// Zeros-minus-poles counts of `Q` slices inside the unit circle.
///
/// `None` marks a slice with a root on the circle (the slice through a node).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RootCounts {
    /// `l_h(+1), l_h(-1)`: roots in `z` of `Q(z, +-1)`.
    pub h_plus: Option<i64>,
    pub h_minus: Option<i64>,
    /// `l_v(+1), l_v(-1)`: roots in `w` of `Q(+-1, w)`.
    pub v_plus: Option<i64>,
    pub v_minus: Option<i64>,
}

const CIRCLE_BAND: f64 = 1e-8;

fn slice_count(q: &LaurentPoly2, var: Var, at: f64) -> Result<Option<i64>> {
    let b = q.degree_box().ok_or_else(|| Error::DegenerateSlice("Q is zero".into()))?;
    let flat = match var {
        Var::Z => b.zmin == b.zmax,
        Var::W => b.wmin == b.wmax,
    };
    if flat {
        return Err(Error::DegenerateSlice(format!("Q does not depend on {var:?}")));
    }
    let (lo, c) = q.slice(var, Complex64::new(at, 0.0));
    let d = circle_data(lo, &c).ok_or_else(|| Error::DegenerateSlice(format!("slice at {at} vanishes identically")))?;
    Ok((d.gap > CIRCLE_BAND).then_some(d.winding))
}

pub fn root_counts(cp: &CharPoly) -> Result<RootCounts> {
    let q = cp.q().ok_or(Error::NotBipartite)?;
    root_counts_q(q)
}

fn root_counts_q(q: &LaurentPoly2) -> Result<RootCounts> {
    Ok(RootCounts {
        h_plus: slice_count(q, Var::Z, 1.0)?,
        h_minus: slice_count(q, Var::Z, -1.0)?,
        v_plus: slice_count(q, Var::W, 1.0)?,
        v_minus: slice_count(q, Var::W, -1.0)?,
    })
}

/// The distinguished conjugate node after colour normalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Distinguished {
    pub node: NodeReport,
    /// Whether black and white were exchanged, i.e. `Q` replaced by `Q(1/z, 1/w)`.
    pub swapped: bool,
    /// `Q` after the exchange.
    pub q: LaurentPoly2,
    /// `(l_h, l_v)` after the exchange and the real-root conventions.
    pub ell: [i64; 2],
}

/// Pick the member of a conjugate pair on which `|w(z)|` decreases along the circle.
///
/// Black and white are first exchanged if needed so that `l_v(+1) = l_v(-1) - 1`.
/// When a slice through `z = +-1` is undefined it is fixed by that same rule, and
/// `l_h` is taken as `l_h(+1) - 1` when `w0 = -1`.
pub fn distinguish_conjugate_node(cp: &CharPoly, pair: &[NodeReport; 2]) -> Result<Distinguished> {
    let q0 = cp.q().ok_or(Error::NotBipartite)?;
    let c0 = root_counts_q(q0)?;
    let swapped = match (c0.v_plus, c0.v_minus) {
        (Some(p), Some(m)) if p == m - 1 => false,
        (Some(p), Some(m)) if p == m + 1 => true,
        (Some(_), Some(_)) => return Err(Error::Unclassifiable("l_v(+1) and l_v(-1) differ by more than one".into())),
        _ => false,
    };
    let q = if swapped { q0.reflect() } else { q0.clone() };
    let c = if swapped { root_counts_q(&q)? } else { c0 };
    let qz = q.partial(Var::Z, 1);
    let qw = q.partial(Var::W, 1);
    let rate = |n: &NodeReport| (Complex64::new(0.0, -2.0 * PI) * n.z * qz.eval_unchecked(n.z, n.w) / (n.w * qw.eval_unchecked(n.z, n.w))).re;
    let (ra, rb) = (rate(&pair[0]), rate(&pair[1]));
    let tol = 1e-10 * (ra.abs() + rb.abs());
    let node = if ra < -tol && rb > tol {
        pair[0]
    } else if rb < -tol && ra > tol {
        pair[1]
    } else {
        return Err(Error::Unclassifiable("degenerate tangency: neither conjugate root is decreasing".into()));
    };
    let lv = match (c.v_plus, c.v_minus) {
        (_, Some(m)) => m,
        (Some(p), None) => p + 1,
        (None, None) => return Err(Error::Unclassifiable("both vertical slices meet the circle".into())),
    };
    let lh = if node.s == 1.0 {
        c.h_plus.ok_or_else(|| Error::Unclassifiable("both horizontal slices meet the circle".into()))? - 1
    } else {
        c.h_minus.ok_or_else(|| Error::Unclassifiable("horizontal slice at w=-1 meets the circle".into()))?
    };
    Ok(Distinguished { node, swapped, q, ell: [lh, lv] })
}

/// `(k0, ka, kb, kc) = (a+b+c-abc, -a+b+c+abc, a-b+c+abc, a+b-c+abc)`.
pub fn kappa_formula(a: f64, b: f64, c: f64) -> [f64; 4] {
    let abc = a * b * c;
    [a + b + c - abc, -a + b + c + abc, a - b + c + abc, a + b - c + abc]
}

/// Criticality quantities of the Fisher and 3.4.6.4 lattices, cross-checked against Pfaffians.
///
/// The check compares `c (-Pf K(1,1), Pf K(1,-1), Pf K(-1,1), Pf K(-1,-1))` with the formula,
/// `c = 1` for Fisher. For 3.4.6.4 (`c = 1/2`) the built-in domain has sectors
/// `(2c, 2b, 2a, 2abc)`, so the vector is `(kc, kb, ka, k0)`.
pub fn kappa(lattice_name: &str, a: f64, b: f64, c: f64) -> Result<[f64; 4]> {
    let w: lattice::Weights = [("a", a), ("b", b), ("c", c)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let d = lattice::builtin(lattice_name, &w)?;
    let k = kappa_formula(a, b, c);
    let (scale, want) = match lattice_name {
        "fisher" => (1.0, k),
        "rhombi-3464" => (0.5, [k[3], k[2], k[1], k[0]]),
        other => return Err(Error::UnknownLattice(format!("kappa is defined for fisher and rhombi-3464, not {other}"))),
    };
    let pf = crate::kasteleyn::dense_pfaffians(&d, &crate::torus::TorusSpec::identity())?;
    let got = [-pf[0].value(), pf[1].value(), pf[2].value(), pf[3].value()].map(|x| scale * x);
    let norm = 1.0 + want.iter().map(|x| x.abs()).fold(0.0, f64::max);
    for i in 0..4 {
        if (got[i] - want[i]).abs() > 1e-10 * norm {
            return Err(Error::KappaMismatch(format!("Pfaffian vector {got:?} vs formula {want:?}")));
        }
    }
    Ok(k)
}
