//! Finite-size corrections to `log Z_E`: conformal shape and domain phase,
//! the three correction families, predictions for whole tori, the winding law
//! and the Ising bookkeeping.
//!
//! Every correction is assembled at the Pfaffian level first: a vector of
//! normalised magnitudes `|Pf K_E(+-1, +-1)| / e^{det E f0}` in the order
//! `(1,1), (1,-1), (-1,1), (-1,-1)`. The total is half its sum and the sector
//! values are `S/4` times it, exactly as for the exact tables.

use crate::charpoly::{self, CharPoly, CriticalityClass, NodeReport};
use crate::error::{Error, Result};
use crate::kasteleyn::{self, Method, SectorTable, S, SIGNS};
use crate::lattice::{self, Doubling, FundamentalDomain};
use crate::linalg::LogValue;
use crate::par;
use crate::special_fn::{self, Char, Tau};
use crate::torus::TorusSpec;
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// Reduce an angle measured in units of `pi` into `(-1, 1]`.
fn wrap_pi(x: f64) -> f64 {
    let t = x.rem_euclid(2.0);
    if t > 1.0 {
        t - 2.0
    } else {
        t
    }
}

fn phase_pi(r: f64) -> Complex64 {
    // exact values on the real axis keep the real-node algebra exact
    if r == 0.0 {
        one()
    } else if r == 1.0 {
        -one()
    } else {
        Complex64::from_polar(1.0, PI * r)
    }
}

/// Conformal shape and domain phase of one torus relative to one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalData {
    pub tau: Tau,
    pub zeta: Complex64,
    pub xi: Complex64,
    /// `zeta = e^{i pi r_e}`, `r_e` in `(-1, 1]`.
    pub r_e: f64,
    pub s_e: f64,
}

/// `tau = (x + y tau_H) / (u + v tau_H)` and `(zeta_E, xi_E) = (z0^u w0^v, z0^x w0^y)`.
pub fn conformal_data(t: &TorusSpec, node: &NodeReport) -> Result<ConformalData> {
    let [[u, v], [x, y]] = t.e().map(|r| r.map(|c| c as f64));
    let th = node.tau;
    let tau = (x + y * th) / (u + v * th);
    let tau = Tau::new(tau).map_err(|_| Error::Unclassifiable(format!("conformal shape {tau} not in the upper half-plane")))?;
    let r_e = wrap_pi(u * node.r + v * node.s);
    let s_e = wrap_pi(x * node.r + y * node.s);
    Ok(ConformalData { tau, zeta: phase_pi(r_e), xi: phase_pi(s_e), r_e, s_e })
}

/// A finite-size correction with its sector refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct FscResult {
    /// Label of the criticality class that selected this correction.
    pub class: &'static str,
    /// `fsc = log FSC`.
    pub value: f64,
    /// `log FSC^{rs}` in the order `00, 10, 01, 11`.
    pub per_sector: [LogValue; 4],
    /// Normalised `|Pf K_E|` at `(1,1), (1,-1), (-1,1), (-1,-1)`.
    pub pf: [f64; 4],
    pub tau: Complex64,
    pub zeta: Complex64,
    pub xi: Complex64,
    pub r_e: f64,
    pub s_e: f64,
}

impl FscResult {
    fn from_pf(class: &'static str, pf: [f64; 4], tau: Tau, zeta: Complex64, xi: Complex64) -> Self {
        let total = 0.5 * pf.iter().sum::<f64>();
        let mut per_sector = [LogValue::Zero; 4];
        for (i, row) in S.iter().enumerate() {
            let v = 0.25 * row.iter().zip(&pf).map(|(a, b)| a * b).sum::<f64>();
            per_sector[i] = if v > 1e-13 * total { LogValue::Log(v.ln()) } else { LogValue::Zero };
        }
        FscResult {
            class,
            value: total.ln(),
            per_sector,
            pf,
            tau: tau.value(),
            zeta,
            xi,
            r_e: wrap_pi(zeta.arg() / PI),
            s_e: wrap_pi(xi.arg() / PI),
        }
    }

    /// `FSC = exp(fsc)`.
    pub fn fsc(&self) -> f64 {
        self.value.exp()
    }
}

/// `Xi^{ab}(zeta, xi | tau)` for any `tau` in the upper half-plane.
fn xi_ab(a: u8, b: u8, zeta: Complex64, xi: Complex64, tau: Tau) -> Result<f64> {
    special_fn::xi_reduced(Char(a, b), zeta, xi, tau)
}

/// The four `Xi^{ab}(zeta, xi | tau)` in Pfaffian order.
fn xi_vector(zeta: Complex64, xi: Complex64, tau: Tau) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = xi_ab((i / 2) as u8, (i % 2) as u8, zeta, xi, tau)?;
    }
    Ok(out)
}

/// `FSC1(tau) = 1/2 sum_{zeta, xi = +-1} Xi(zeta, xi | tau)`, sectors for domain phase `(1, 1)`.
pub fn fsc1(tau: Tau) -> Result<FscResult> {
    fsc1_phase(tau, 0, 0)
}

/// `FSC1` with sectors for the real domain phase `((-1)^r_e, (-1)^s_e)`.
pub fn fsc1_phase(tau: Tau, r_e: u8, s_e: u8) -> Result<FscResult> {
    let zeta = if r_e % 2 == 1 { -one() } else { one() };
    let xi = if s_e % 2 == 1 { -one() } else { one() };
    Ok(FscResult::from_pf("single-real-node", xi_vector(zeta, xi, tau)?, tau, zeta, xi))
}

/// `FSC1^{rs}(tau) = 1/4 sum_{r's'} (-1)^{(s+r')(r+s')} Xi^{r's'}(tau)`, the closed sector form.
pub fn fsc1_sector_closed(r: u8, s: u8, tau: Tau) -> Result<f64> {
    let mut acc = 0.0;
    for c in Char::ALL {
        let sign = if ((s + c.0) * (r + c.1)) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * special_fn::xi_const(c, tau)?;
    }
    Ok(0.25 * acc)
}

/// `FSC2(zeta, xi | tau) = 1/2 sum_{z, w = +-1} Xi(z zeta, w xi | tau)^2`.
pub fn fsc2(zeta: Complex64, xi: Complex64, tau: Tau) -> Result<FscResult> {
    let v = xi_vector(zeta, xi, tau)?.map(|x| x * x);
    Ok(FscResult::from_pf("distinct-conjugate-nodes", v, tau, zeta, xi))
}

/// `FSC2` through its Gaussian lattice sum,
/// `sum_e exp(-pi/2 g_tau(e - (s, -r))) / (|eta|^2 (2 Im tau)^{1/2})` for `(zeta, xi) = (e^{i pi r}, e^{i pi s})`.
pub fn fsc2_gaussian(zeta: Complex64, xi: Complex64, tau: Tau) -> Result<f64> {
    let (r, s) = (zeta.arg() / PI, xi.arg() / PI);
    let sum = special_fn::gaussian_lattice_sum(tau, PI / 2.0, [s, -r], |_, _| 1.0);
    Ok(sum / (special_fn::eta(tau)?.norm_sqr() * (2.0 * tau.im()).sqrt()))
}

/// `FSC3(zeta, xi | tau) = 1/2 sum_{z, w = +-1} Xi(z, w | tau) Xi(z zeta, w xi | tau)`.
pub fn fsc3(zeta: Complex64, xi: Complex64, tau: Tau) -> Result<FscResult> {
    fsc3_nodes((one(), one()), (zeta, xi), tau)
}

/// `FSC3` from the two individual node phases; the total depends only on their product.
pub fn fsc3_nodes(p1: (Complex64, Complex64), p2: (Complex64, Complex64), tau: Tau) -> Result<FscResult> {
    let a = xi_vector(p1.0, p1.1, tau)?;
    let b = xi_vector(p2.0, p2.1, tau)?;
    let v = [a[0] * b[0], a[1] * b[1], a[2] * b[2], a[3] * b[3]];
    Ok(FscResult::from_pf("two-real-nodes", v, tau, p1.0 * p2.0, p1.1 * p2.1))
}

/// Leading behaviour of `fsc1(tau)` as `Im tau` grows: `pi Im tau / 12`.
pub fn fsc1_asymptotic(tau: Tau) -> f64 {
    PI * tau.im() / 12.0
}

/// Leading behaviour of `fsc2(+-i, xi | tau)`: `pi Im tau / 24 + log 2`.
pub fn fsc2_quarter_asymptotic(tau: Tau) -> f64 {
    PI * tau.im() / 24.0 + LN_2
}

/// Leading behaviour of `fsc3(-1, +-1 | tau)`: `-pi Im tau / 12 + log 2`.
pub fn fsc3_odd_asymptotic(tau: Tau) -> f64 {
    -PI * tau.im() / 12.0 + LN_2
}

/// Double-dimer sectors `ZZ^{rs} / e^{2 det E f0}` for a single real node, order `00, 10, 01, 11`.
pub fn double_dimer_gaussian(tau: Tau) -> Result<[f64; 4]> {
    let eta2 = special_fn::eta(tau)?.norm_sqr();
    let y = tau.im();
    let mut out = [0.0; 4];
    for (i, o) in out.iter_mut().enumerate() {
        let (r, s) = ((i % 2) as f64, (i / 2) as f64);
        *o = if i == 0 {
            special_fn::gaussian_lattice_sum(tau, PI / 2.0, [0.0, 0.0], |_, _| 1.0) / (2.0 * eta2 * (2.0 * y).sqrt())
        } else {
            // exp(-pi/4 g(2e + (r, s))) = exp(-pi g(e + (r, s)/2))
            special_fn::gaussian_lattice_sum(tau, PI, [-r / 2.0, -s / 2.0], |_, _| 1.0) / (2.0 * eta2 * y.sqrt())
        };
    }
    Ok(out)
}

/// The correction selected by a criticality class on the torus `t`.
///
/// `Ok(None)` for a non-vanishing polynomial, where the correction is zero.
pub fn predict_fsc(class: &CriticalityClass, t: &TorusSpec) -> Result<Option<FscResult>> {
    let out = match class {
        CriticalityClass::NonVanishing => return Ok(None),
        CriticalityClass::SingleRealNode(n) => {
            let cd = conformal_data(t, n)?;
            let bit = |x: f64| u8::from(x.abs() > 0.5);
            fsc1_phase(cd.tau, bit(cd.r_e), bit(cd.s_e))?
        }
        CriticalityClass::DistinctConjugateNodes(pair) => {
            let cd = conformal_data(t, &pair[0])?;
            fsc2(cd.zeta, cd.xi, cd.tau)?
        }
        CriticalityClass::RealRootOfQ(n) => {
            let cd = conformal_data(t, n)?;
            let mut r = fsc2(cd.zeta, cd.xi, cd.tau)?;
            r.class = "real-root-of-Q";
            r
        }
        CriticalityClass::TwoRealNodes(pair) => {
            let c1 = conformal_data(t, &pair[0])?;
            let c2 = conformal_data(t, &pair[1])?;
            let dt = (c1.tau.value() - c2.tau.value()).norm();
            if dt > 1e-6 * c1.tau.value().norm() {
                return Err(Error::Unclassifiable(format!("the two real nodes have different Hessians (|d tau| = {dt:e})")));
            }
            fsc3_nodes((c1.zeta, c1.xi), (c2.zeta, c2.xi), c1.tau)?
        }
    };
    Ok(Some(out))
}

/// A domain with an even number of vertices per torus, standing in for an odd one.
#[derive(Clone, Debug)]
pub struct Cover {
    pub domain: FundamentalDomain,
    pub torus: TorusSpec,
    /// The doubling used, if the original domain had odd `k`.
    pub doubling: Option<Doubling>,
}

/// Re-express `(d, t)` over a domain with even `k`.
///
/// Odd `k` is doubled along whichever of the diagonal, horizontal and vertical
/// sublattices contains both rows of `E` (tried in that order, so bipartite
/// covers win). `Ok(None)` when the torus has an odd number of vertices and
/// therefore no dimer cover.
pub fn even_cover(d: &FundamentalDomain, t: &TorusSpec) -> Result<Option<Cover>> {
    if (d.k() as i64 * t.det()) % 2 == 1 {
        return Ok(None);
    }
    if d.k() % 2 == 0 {
        return Ok(Some(Cover { domain: d.clone(), torus: t.clone(), doubling: None }));
    }
    let e = t.e();
    for how in [Doubling::Diagonal, Doubling::Horizontal, Doubling::Vertical] {
        let m = how.matrix();
        let dm = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        // E' = E M^{-1}
        let adj = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
        let mut ep = [[0i64; 2]; 2];
        let mut ok = true;
        for i in 0..2 {
            for j in 0..2 {
                let num = e[i][0] * adj[0][j] + e[i][1] * adj[1][j];
                ok &= num % dm == 0;
                ep[i][j] = num / dm;
            }
        }
        if ok {
            let domain = lattice::double_domain(d, how)?;
            return Ok(Some(Cover { domain, torus: TorusSpec::new(ep)?, doubling: Some(how) }));
        }
    }
    Err(Error::OddVertexCount(d.k()))
}

/// Exact sector table, passing through [`even_cover`] for odd `k`.
/// `Ok(None)` when the torus admits no dimer cover.
pub fn exact_sector_table(d: &FundamentalDomain, t: &TorusSpec, method: Method) -> Result<Option<SectorTable>> {
    match even_cover(d, t)? {
        None => Ok(None),
        Some(c) => kasteleyn::sector_table(&c.domain, &c.torus, method).map(Some),
    }
}

/// `log Z_E ~ det E f0 + fsc` for one torus.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub class: &'static str,
    /// Determinant of the torus over the (possibly doubled) domain.
    pub det: i64,
    /// Free energy per (possibly doubled) fundamental domain.
    pub f0: f64,
    pub fsc: Option<FscResult>,
    /// Predicted `log Z_E`; `Zero` when the torus has no dimer cover.
    pub log_z: LogValue,
    pub doubling: Option<Doubling>,
}

/// Predict `log Z_E` from the criticality class of `d`.
pub fn predict_log_z(d: &FundamentalDomain, t: &TorusSpec) -> Result<Prediction> {
    let Some(c) = even_cover(d, t)? else {
        return Ok(Prediction { class: "no-cover", det: t.det(), f0: f64::NAN, fsc: None, log_z: LogValue::Zero, doubling: None });
    };
    let cp = charpoly::build(&c.domain)?;
    let class = charpoly::find_nodes(&cp, &charpoly::NodeOptions::default())?;
    predict_from(&cp, &class, &c.torus, c.doubling)
}

/// As [`predict_log_z`] with the polynomial and class already computed.
pub fn predict_from(cp: &CharPoly, class: &CriticalityClass, t: &TorusSpec, doubling: Option<Doubling>) -> Result<Prediction> {
    let f0 = charpoly::free_energy(cp)?;
    let fsc = predict_fsc(class, t)?;
    let det = t.det();
    let log_z = LogValue::Log(det as f64 * f0 + fsc.as_ref().map_or(0.0, |f| f.value));
    Ok(Prediction { class: class.label(), det, f0, fsc, log_z, doubling })
}

/// An entry of the square-lattice parity table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SquareEntry {
    /// Odd number of vertices: no dimer cover, `log Z = -inf`.
    NoCover,
    Fsc2(Complex64, Complex64),
    Fsc3(f64, f64),
}

impl SquareEntry {
    /// Value at `tau`; `Zero` encodes `-inf`.
    pub fn eval(self, tau: Tau) -> Result<LogValue> {
        Ok(match self {
            SquareEntry::NoCover => LogValue::Zero,
            SquareEntry::Fsc2(z, x) => LogValue::Log(fsc2(z, x, tau)?.value),
            SquareEntry::Fsc3(z, x) => LogValue::Log(fsc3(Complex64::new(z, 0.0), Complex64::new(x, 0.0), tau)?.value),
        })
    }

    pub fn label(self) -> String {
        let c = |z: Complex64| {
            if z.im.abs() > 0.5 {
                if z.im > 0.0 { "+i" } else { "-i" }
            } else if z.re > 0.0 {
                "+1"
            } else {
                "-1"
            }
        };
        match self {
            SquareEntry::NoCover => "none".into(),
            SquareEntry::Fsc2(z, x) => format!("fsc2({},{})", c(z), c(x)),
            SquareEntry::Fsc3(z, x) => format!("fsc3({},{})", c(z.into()), c(x.into())),
        }
    }
}

/// The unweighted square-lattice table: row `(a, b) mod 2`, column `(c, d) mod 2`
/// for the torus spanned by `(a, b)` and `(c, d)`.
pub fn square_parity_entry(e: [[i64; 2]; 2]) -> SquareEntry {
    let p = |x: i64| x.rem_euclid(2);
    let row = (p(e[0][0]), p(e[0][1]));
    let col = (p(e[1][0]), p(e[1][1]));
    let i = I;
    use SquareEntry::*;
    match (row, col) {
        ((0, 0), (0, 0)) => Fsc2(one(), one()),
        ((0, 0), (0, 1)) | ((0, 0), (1, 0)) => Fsc3(1.0, -1.0),
        ((0, 0), (1, 1)) => Fsc2(one(), i),
        ((0, 1), (0, 0)) | ((1, 0), (0, 0)) => Fsc3(-1.0, 1.0),
        ((0, 1), (0, 1)) | ((1, 0), (1, 0)) => Fsc3(-1.0, -1.0),
        ((1, 1), (0, 0)) => Fsc2(i, one()),
        ((1, 1), (1, 1)) => Fsc2(i, i),
        _ => NoCover,
    }
}

/// Conformal shape of the unweighted square torus spanned by `(a, b)`, `(c, d)`: `(c + d i) / (a + b i)`.
pub fn square_tau(e: [[i64; 2]; 2]) -> Result<Tau> {
    let a = Complex64::new(e[0][0] as f64, e[0][1] as f64);
    let c = Complex64::new(e[1][0] as f64, e[1][1] as f64);
    Tau::new(c / a)
}

/// One sample of a correction curve over the log aspect ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub log_rho: f64,
    /// Parity or phase class the curve belongs to.
    pub class: String,
    /// The correction function in closed form.
    pub function: String,
    pub fsc: LogValue,
}

/// Classes of the square table with an even vertex count, as `"ab/cd"` labels.
pub fn square_classes() -> Vec<(String, SquareEntry)> {
    let mut out = Vec::new();
    for row in 0..4i64 {
        for col in 0..4i64 {
            let e = [[row / 2, row % 2], [col / 2, col % 2]];
            let entry = square_parity_entry(e);
            if entry != SquareEntry::NoCover {
                out.push((format!("{}{}/{}{}", e[0][0], e[0][1], e[1][0], e[1][1]), entry));
            }
        }
    }
    out
}

/// Limiting corrections of near-rectilinear unweighted square tori at `tau = i rho`.
pub fn square_curves(log_rhos: &[f64]) -> Result<Vec<CurvePoint>> {
    let classes = square_classes();
    let jobs: Vec<(f64, usize)> = log_rhos.iter().flat_map(|&l| (0..classes.len()).map(move |c| (l, c))).collect();
    par::map_slice(&jobs, |&(l, c)| {
        let (label, entry) = &classes[c];
        let tau = Tau::new(I * l.exp())?;
        Ok(CurvePoint { log_rho: l, class: label.clone(), function: entry.label(), fsc: entry.eval(tau)? })
    })
    .into_iter()
    .collect()
}

/// Distinct domain phases reachable by some torus, up to the symmetries that
/// leave the correction unchanged on the imaginary axis.
fn reachable_phases(class: &CriticalityClass) -> Vec<(f64, f64)> {
    let nodes = class.nodes();
    let (r0, s0) = match class {
        CriticalityClass::TwoRealNodes(p) => (p[0].r + p[1].r, p[0].s + p[1].s),
        _ => (nodes[0].r, nodes[0].s),
    };
    let mut seen: Vec<(f64, f64)> = Vec::new();
    for u in 0..12 {
        for v in 0..12 {
            let r = wrap_pi(u as f64 * r0 + v as f64 * s0);
            for x in 0..12 {
                for y in 0..12 {
                    let s = wrap_pi(x as f64 * r0 + y as f64 * s0);
                    if !seen.iter().any(|&(a, b)| (a - r).abs() < 1e-9 && (b - s).abs() < 1e-9) {
                        seen.push((r, s));
                    }
                }
            }
        }
    }
    seen
}

/// Limiting correction curves `rho -> fsc(zeta, xi | i rho)` of a critical lattice,
/// one per distinct reachable domain phase.
pub fn phase_curves(class: &CriticalityClass, log_rhos: &[f64]) -> Result<Vec<CurvePoint>> {
    let eval = |r: f64, s: f64, tau: Tau| -> Result<f64> {
        let (z, x) = (phase_pi(r), phase_pi(s));
        Ok(match class {
            CriticalityClass::NonVanishing => 0.0,
            CriticalityClass::SingleRealNode(_) => fsc1(tau)?.value,
            CriticalityClass::DistinctConjugateNodes(_) | CriticalityClass::RealRootOfQ(_) => fsc2(z, x, tau)?.value,
            CriticalityClass::TwoRealNodes(_) => fsc3(z, x, tau)?.value,
        })
    };
    let probes = [Tau::new(I)?, Tau::new(2.0 * I)?, Tau::new(0.7 * I)?];
    let mut reps: Vec<(f64, f64, [f64; 3])> = Vec::new();
    if class.nodes().is_empty() {
        reps.push((0.0, 0.0, [0.0; 3]));
    } else {
        for (r, s) in reachable_phases(class) {
            let key = [eval(r, s, probes[0])?, eval(r, s, probes[1])?, eval(r, s, probes[2])?];
            if !reps.iter().any(|(_, _, k)| k.iter().zip(&key).all(|(a, b)| (a - b).abs() < 1e-9)) {
                reps.push((r, s, key));
            }
        }
    }
    let fname = match class {
        CriticalityClass::NonVanishing => "0",
        CriticalityClass::SingleRealNode(_) => "fsc1",
        CriticalityClass::DistinctConjugateNodes(_) | CriticalityClass::RealRootOfQ(_) => "fsc2",
        CriticalityClass::TwoRealNodes(_) => "fsc3",
    };
    let jobs: Vec<(f64, usize)> = log_rhos.iter().flat_map(|&l| (0..reps.len()).map(move |c| (l, c))).collect();
    par::map_slice(&jobs, |&(l, c)| {
        let (r, s, _) = reps[c];
        let tau = Tau::new(I * l.exp())?;
        Ok(CurvePoint {
            log_rho: l,
            class: format!("r_E={},s_E={}", fmt_frac(r), fmt_frac(s)),
            function: format!("{fname}(e^(i pi {}),e^(i pi {}))", fmt_frac(r), fmt_frac(s)),
            fsc: LogValue::Log(eval(r, s, tau)?),
        })
    })
    .into_iter()
    .collect()
}

/// Short rational form of a phase exponent when its denominator is small.
fn fmt_frac(x: f64) -> String {
    for q in 1..=12i64 {
        let p = (x * q as f64).round();
        if (p / q as f64 - x).abs() < 1e-9 {
            return if q == 1 { format!("{}", p as i64) } else { format!("{}/{}", p as i64, q) };
        }
    }
    format!("{x:.12}")
}

/// Parameters of the limiting discrete Gaussian law of the winding.
#[derive(Clone, Debug, PartialEq)]
pub struct WindingLaw {
    pub mu: [f64; 2],
    pub sigma: [[f64; 2]; 2],
    /// Black and white exchanged to normalise the root counts.
    pub color_swapped: bool,
    /// `(l_h, l_v)`.
    pub ell: [i64; 2],
    /// The distinguished node.
    pub node: NodeReport,
}

/// Centre and scale of the winding law of a bipartite torus with distinct conjugate nodes:
/// `mu = (x r0 + y s0, -u r0 - v s0) - det E (E^T)^{-1} l`,
/// `Sigma = (E^T)^{-1} H E^{-1} det E / sqrt(det H)`.
pub fn winding_law(cp: &CharPoly, class: &CriticalityClass, t: &TorusSpec) -> Result<WindingLaw> {
    let CriticalityClass::DistinctConjugateNodes(pair) = class else {
        return Err(Error::ClassMismatch(format!("winding law needs distinct conjugate nodes, got {}", class.label())));
    };
    let dist = charpoly::distinguish_conjugate_node(cp, pair)?;
    let n = dist.node;
    let [[u, v], [x, y]] = t.e().map(|r| r.map(|c| c as f64));
    let det = t.det() as f64;
    let (lh, lv) = (dist.ell[0] as f64, dist.ell[1] as f64);
    let mut mu = [x * n.r + y * n.s - (y * lh - x * lv), -u * n.r - v * n.s - (-v * lh + u * lv)];
    if dist.swapped {
        // the law is stated for the exchanged colouring, whose windings are negated
        mu = mu.map(|m| -m);
    }
    // E^{-1} = [[y, -v], [-x, u]] / det
    let einv = [[y / det, -v / det], [-x / det, u / det]];
    let h = n.hessian;
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    acc += einv[a][i] * h[a][b] * einv[b][j];
                }
            }
            m[i][j] = acc * det / n.det_h().sqrt();
        }
    }
    Ok(WindingLaw { mu, sigma: m, color_swapped: dist.swapped, ell: dist.ell, node: n })
}

/// Fisher weights `(a, b, c) = (e^{2 beta_a}, e^{2 beta_b}, e^{2 beta_c})`.
pub fn fisher_weights(beta: [f64; 3]) -> [f64; 3] {
    beta.map(|b| (2.0 * b).exp())
}

/// One torus checked by [`ising_critical_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct IsingTorusCheck {
    pub e: [[i64; 2]; 2],
    pub log_z: f64,
    /// Index (order `00, 10, 01, 11`) of the sector that carries half of `Z`.
    pub sector: usize,
    /// `|Z - 2 Z^{sector}| / Z`.
    pub rel_err: f64,
    /// `log` of the Ising partition function, `log 2 + log Z^{00} - det E (beta_a + beta_b + beta_c)`.
    pub log_ising_z: f64,
}

/// Criticality bookkeeping for the Ising model on the triangular lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingReport {
    pub beta: [f64; 3],
    pub weights: [f64; 3],
    /// `(k0, ka, kb, kc)`.
    pub kappa: [f64; 4],
    /// Index into `kappa` of the vanishing quantity, if any.
    pub vanishing: Option<usize>,
    pub line: &'static str,
    pub tori: Vec<IsingTorusCheck>,
}

/// Which `kappa` vanishes for the couplings `beta`, and the relation
/// `Z_E = 2 Z^{s_E r_E}` on the given Fisher tori.
pub fn ising_critical_check(beta: [f64; 3], tori: &[TorusSpec]) -> Result<IsingReport> {
    let w = fisher_weights(beta);
    let kappa = charpoly::kappa_formula(w[0], w[1], w[2]);
    let scale = w[0] * w[1] * w[2] + w.iter().sum::<f64>();
    let vanishing = kappa.iter().position(|k| k.abs() <= 1e-12 * scale);
    let line = match vanishing {
        None => "off-critical",
        Some(0) => "ferromagnetic critical: a + b + c = abc",
        Some(1) => "critical: a = b + c + abc",
        Some(2) => "critical: b = a + c + abc",
        _ => "critical: c = a + b + abc",
    };
    let mut weights = lattice::Weights::new();
    for (k, v) in ["a", "b", "c"].iter().zip(w) {
        weights.insert((*k).into(), v);
    }
    let d = lattice::builtin("fisher", &weights)?;
    let mut out = Vec::new();
    for t in tori {
        let st = kasteleyn::sector_table(&d, t, Method::Dense)?;
        let log_z = st.z.log().ok_or_else(|| Error::Unclassifiable("Z vanishes on a Fisher torus".into()))?;
        let [[u, v], [x, y]] = t.e();
        // node at SIGNS[i]; domain phase ((-1)^r_E, (-1)^s_E)
        let (sector, rel_err) = match vanishing {
            Some(i) => {
                let (z0, w0) = SIGNS[i];
                let bit = |s: f64| i64::from(s < 0.0);
                let r_e = (u * bit(z0) + v * bit(w0)).rem_euclid(2) as usize;
                let s_e = (x * bit(z0) + y * bit(w0)).rem_euclid(2) as usize;
                let idx = s_e + 2 * r_e;
                let half = st.sectors[idx].log().map_or(0.0, |l| (l - log_z).exp());
                (idx, (1.0 - 2.0 * half).abs())
            }
            None => (0, f64::NAN),
        };
        let z00 = st.sectors[0].log().ok_or_else(|| Error::Unclassifiable("empty 00 sector".into()))?;
        let log_ising_z = LN_2 + z00 - t.det() as f64 * beta.iter().sum::<f64>();
        out.push(IsingTorusCheck { e: t.e(), log_z, sector, rel_err, log_ising_z });
    }
    Ok(IsingReport { beta, weights: w, kappa, vanishing, line, tori: out })
}
