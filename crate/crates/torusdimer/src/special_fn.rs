//! Theta functions, Dedekind eta, the Xi family and discrete Gaussians.
//!
//! Conventions: `q = exp(pi i tau)`, `theta_rs(nu|tau) = sum_n exp(pi i tau (n+r/2)^2
//! + 2 pi i (n+r/2)(nu+s/2))`, and `eta(tau) = q^{1/12} prod_j (1 - q^{2j})`.
//! For unimodular `zeta, xi` write `(-zeta, -xi) = exp(2 pi i (phi, psi))` with
//! `phi, psi` in `(-1/2, 1/2]`; then
//! `Xi^{rs}(zeta, xi | tau) = |theta_rs(phi tau - psi | tau) exp(pi i tau phi^2) / eta(tau)|`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Smallest Im tau accepted by the direct series.
pub const IM_TAU_FLOOR: f64 = 1e-3;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A point of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tau(Complex64);

impl Tau {
    pub fn new(t: Complex64) -> Result<Self> {
        if !(t.im > 0.0) || !t.re.is_finite() {
            return Err(Error::BadTorus(format!("tau = {t} is not in the upper half-plane")));
        }
        Ok(Tau(t))
    }
    pub fn value(self) -> Complex64 {
        self.0
    }
    pub fn im(self) -> f64 {
        self.0.im
    }
    fn check_floor(self) -> Result<()> {
        if self.0.im < IM_TAU_FLOOR {
            Err(Error::TauFloor(self.0.im))
        } else {
            Ok(())
        }
    }
}

/// Theta characteristic `(r, s)` with `r, s` in `{0, 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Char(pub u8, pub u8);

impl Char {
    pub const C00: Char = Char(0, 0);
    pub const C01: Char = Char(0, 1);
    pub const C10: Char = Char(1, 0);
    pub const C11: Char = Char(1, 1);
    pub const ALL: [Char; 4] = [Char::C00, Char::C01, Char::C10, Char::C11];
}

/// Sum `sum_n exp(pi i tau (n+a)^2 + 2 pi i (n+a) x)` starting at the Gaussian
/// peak and walking outwards until three consecutive terms are negligible.
/// Returned as `(s, l)` with the sum equal to `s * exp(l)`, so that huge Im tau
/// neither underflows nor overflows.
fn char_sum_scaled(tau: Complex64, a: f64, x: Complex64) -> (Complex64, f64) {
    let expo = |n: i64| {
        let m = n as f64 + a;
        I * PI * tau * m * m + 2.0 * PI * I * m * x
    };
    // peak of Re exponent: -pi Im(tau) m^2 - 2 pi m Im(x)
    let centre = (-x.im / tau.im - a).round() as i64;
    let l = expo(centre).re;
    let term = |n: i64| (expo(n) - l).exp();
    let mut s = term(centre);
    for dir in [1i64, -1] {
        let mut small = 0;
        let mut n = centre + dir;
        while small < 3 {
            let t = term(n);
            s += t;
            if !(t.norm() >= 1e-18) {
                small += 1;
            } else {
                small = 0;
            }
            n += dir;
        }
    }
    (s, l)
}

fn char_sum(tau: Complex64, a: f64, x: Complex64) -> Complex64 {
    let (s, l) = char_sum_scaled(tau, a, x);
    s * l.exp()
}

/// Jacobi theta function with characteristic.
pub fn theta(ch: Char, nu: Complex64, tau: Tau) -> Result<Complex64> {
    tau.check_floor()?;
    Ok(char_sum(tau.0, ch.0 as f64 / 2.0, nu + ch.1 as f64 / 2.0))
}

/// Product-form theta, independent of [`theta`]; used as a cross-check.
pub fn theta_product(ch: Char, nu: Complex64, tau: Tau) -> Result<Complex64> {
    tau.check_floor()?;
    let q = (I * PI * tau.0).exp();
    let c2 = (2.0 * PI * nu).cos();
    let g = euler_g(q);
    let mut prod = g;
    let mut j = 1usize;
    loop {
        // half-integer powers for theta00/theta01, integer for theta10/theta11
        let ell = if ch.0 == 0 { j as f64 - 0.5 } else { j as f64 };
        let q2 = qpow(q, 2.0 * ell);
        let q4 = q2 * q2;
        let sgn = if (ch.0 == 0 && ch.1 == 1) || (ch.0 == 1 && ch.1 == 1) { -1.0 } else { 1.0 };
        let f = Complex64::new(1.0, 0.0) + sgn * 2.0 * q2 * c2 + q4;
        prod *= f;
        if q2.norm() < 1e-18 {
            break;
        }
        j += 1;
    }
    let q14 = (I * PI * tau.0 / 4.0).exp();
    Ok(match ch {
        Char(0, _) => prod,
        Char(1, 0) => 2.0 * q14 * (PI * nu).cos() * prod,
        _ => -2.0 * q14 * (PI * nu).sin() * prod,
    })
}

fn qpow(q: Complex64, e: f64) -> Complex64 {
    // q = exp(pi i tau) so q^e = exp(e log q) with the principal branch of pi i tau
    (q.ln() * e).exp()
}

fn euler_g(q: Complex64) -> Complex64 {
    let mut g = Complex64::new(1.0, 0.0);
    let q2 = q * q;
    let mut p = q2;
    while p.norm() > 1e-18 {
        g *= Complex64::new(1.0, 0.0) - p;
        p *= q2;
    }
    g
}

/// Dedekind eta.
pub fn eta(tau: Tau) -> Result<Complex64> {
    tau.check_floor()?;
    let q = (I * PI * tau.0).exp();
    Ok((I * PI * tau.0 / 12.0).exp() * euler_g(q))
}

fn log_abs_eta(tau: Tau) -> f64 {
    -PI * tau.0.im / 12.0 + euler_g((I * PI * tau.0).exp()).norm().ln()
}

/// `(phi, psi)` with `(-zeta, -xi) = exp(2 pi i (phi, psi))`, both in `(-1/2, 1/2]`.
pub fn phase_coords(zeta: Complex64, xi: Complex64) -> (f64, f64) {
    let f = |u: Complex64| {
        let t = (-u).arg() / (2.0 * PI);
        if t <= -0.5 {
            t + 1.0
        } else {
            t
        }
    };
    (f(zeta), f(xi))
}

/// `Xi^{00}` through the folded series `|sum_n exp(pi i tau (n+phi)^2 - 2 pi i n psi)| / |eta|`.
fn xi00_direct(zeta: Complex64, xi: Complex64, tau: Tau) -> Result<f64> {
    tau.check_floor()?;
    let (phi, psi) = phase_coords(zeta, xi);
    // the series carries exp(2 pi i (n+phi)(-psi)), a constant phase away from the definition
    let (s, l) = char_sum_scaled(tau.0, phi, Complex64::new(-psi, 0.0));
    if s.norm() == 0.0 {
        return Ok(0.0);
    }
    Ok((s.norm().ln() + l - log_abs_eta(tau)).exp())
}

fn fold(rs: Char, zeta: Complex64, xi: Complex64) -> (Complex64, Complex64) {
    let sz = if rs.0 == 1 { -zeta } else { zeta };
    let sx = if rs.1 == 1 { -xi } else { xi };
    (sz, sx)
}

/// `Xi^{rs}(zeta, xi | tau)` by the direct series. Needs Im tau above the floor.
pub fn xi(rs: Char, zeta: Complex64, xi: Complex64, tau: Tau) -> Result<f64> {
    let (z, x) = fold(rs, zeta, xi);
    xi00_direct(z, x, tau)
}

/// One step of the modular reduction applied to `Xi(zeta, xi | tau)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModularMove {
    /// tau -> tau + 1
    TPlus,
    /// tau -> tau - 1
    TMinus,
    /// tau -> -1/tau
    S,
}

/// Move `tau` into the standard fundamental domain, transporting the phases.
///
/// Uses `Xi(zeta, xi | tau) = Xi(zeta, zeta xi | tau+1)`,
/// `Xi(zeta, xi | tau) = Xi(zeta, conj(zeta) xi | tau-1)` and
/// `Xi(zeta, xi | tau) = Xi(conj(xi), zeta | -1/tau)`.
pub fn reduce(zeta: Complex64, xi: Complex64, tau: Tau) -> (Complex64, Complex64, Tau, Vec<ModularMove>) {
    let (mut z, mut x, mut t) = (zeta, xi, tau.0);
    let mut moves = Vec::new();
    for _ in 0..10_000 {
        if t.re > 0.5 + 1e-12 {
            x *= z.conj();
            t -= 1.0;
            moves.push(ModularMove::TMinus);
        } else if t.re < -0.5 - 1e-12 {
            x *= z;
            t += 1.0;
            moves.push(ModularMove::TPlus);
        } else if t.norm_sqr() < 1.0 - 1e-12 {
            let nz = x.conj();
            x = z;
            z = nz;
            t = -1.0 / t;
            moves.push(ModularMove::S);
        } else {
            break;
        }
    }
    (z, x, Tau(t), moves)
}

/// `Xi^{rs}` evaluated after modular reduction; valid for any tau.
pub fn xi_reduced(rs: Char, zeta: Complex64, xi: Complex64, tau: Tau) -> Result<f64> {
    let (z, x) = fold(rs, zeta, xi);
    let (z, x, t, _) = reduce(z, x, tau);
    xi00_direct(z, x, t)
}

/// `Xi^{rs}(tau) := Xi^{rs}(-1, -1 | tau)`.
pub fn xi_const(rs: Char, tau: Tau) -> Result<f64> {
    let m1 = Complex64::new(-1.0, 0.0);
    xi_reduced(rs, m1, m1, tau)
}

/// The quadratic form `g_tau(e) = (e1^2 + 2 Re(tau) e1 e2 + |tau|^2 e2^2) / Im(tau)`.
pub fn g_tau(tau: Tau, e: [f64; 2]) -> f64 {
    let t = tau.0;
    (e[0] * e[0] + 2.0 * t.re * e[0] * e[1] + t.norm_sqr() * e[1] * e[1]) / t.im
}

/// `sum_{e in Z^2} sign(e) exp(-c g_tau(e - centre))`, truncated where terms drop below 1e-20.
pub fn gaussian_lattice_sum<F: Fn(i64, i64) -> f64>(tau: Tau, c: f64, centre: [f64; 2], sign: F) -> f64 {
    let t = tau.0;
    let cut = (1e20f64).ln() / c;
    let h1 = (cut * t.norm_sqr() / t.im).sqrt() + 1.0;
    let h2 = (cut / t.im).sqrt() + 1.0;
    let mut s = 0.0;
    for e1 in ((centre[0] - h1).floor() as i64)..=((centre[0] + h1).ceil() as i64) {
        for e2 in ((centre[1] - h2).floor() as i64)..=((centre[1] + h2).ceil() as i64) {
            let g = g_tau(tau, [e1 as f64 - centre[0], e2 as f64 - centre[1]]);
            if g <= cut {
                s += sign(e1, e2) * (-c * g).exp();
            }
        }
    }
    s
}

/// `Xi^{rs}(zeta, xi)^2` through its Gaussian lattice-sum representation.
pub fn xi_sq_gaussian(rs: Char, zeta: Complex64, xi: Complex64, tau: Tau) -> Result<f64> {
    let (phi, psi) = phase_coords(zeta, xi);
    let (r, s) = (rs.0 as i64, rs.1 as i64);
    let sum = gaussian_lattice_sum(tau, PI / 2.0, [2.0 * psi, -2.0 * phi], |j, k| {
        if ((r + k) * (s + j)).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    });
    Ok(sum / (eta(tau)?.norm_sqr() * (2.0 * tau.im()).sqrt()))
}

/// `Xi^{r1 s1}(tau) Xi^{r2 s2}(tau)` through its Gaussian lattice-sum representation.
/// Valid for distinct characteristics among `00`, `01`, `10`.
pub fn xi_pair_gaussian(a: Char, b: Char, tau: Tau) -> Result<f64> {
    let off = [(a.1 + b.1) as f64, (a.0 + b.0) as f64];
    // exp(-pi/4 g(2e + off)) = exp(-pi g(e + off/2))
    let sum = gaussian_lattice_sum(tau, PI, [-off[0] / 2.0, -off[1] / 2.0], |_, _| 1.0);
    Ok(sum / (eta(tau)?.norm_sqr() * tau.im().sqrt()))
}

/// Inclusive rectangular window of winding vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl Window {
    /// `[-h, h]^2`.
    pub fn square(h: i64) -> Self {
        Window { lo: [-h, -h], hi: [h, h] }
    }
    pub fn contains(&self, e: [i64; 2]) -> bool {
        (0..2).all(|i| self.lo[i] <= e[i] && e[i] <= self.hi[i])
    }
    pub fn points(&self) -> Vec<[i64; 2]> {
        let mut v = Vec::new();
        for a in self.lo[0]..=self.hi[0] {
            for b in self.lo[1]..=self.hi[1] {
                v.push([a, b]);
            }
        }
        v
    }
}

/// Probability table of a discrete Gaussian on Z^2 restricted to a window.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTable {
    pub window: Window,
    pub probs: Vec<([i64; 2], f64)>,
    /// Mass of the full distribution falling outside the window.
    pub tail_mass: f64,
}

/// Masses proportional to `exp(-pi/2 (e-mu)^T Sigma^{-1} (e-mu))`, normalised over all of Z^2.
///
/// Fails when more than 1e-12 of the mass lies outside the window; use
/// [`discrete_gaussian_restricted`] to accept a truncated window.
pub fn discrete_gaussian(mu: [f64; 2], sigma: [[f64; 2]; 2], window: Window) -> Result<GaussianTable> {
    let t = discrete_gaussian_restricted(mu, sigma, window)?;
    if t.tail_mass > 1e-12 {
        return Err(Error::Window(format!("tail mass {:e} outside window exceeds 1e-12", t.tail_mass)));
    }
    Ok(t)
}

/// As [`discrete_gaussian`] but reports the outside mass instead of failing.
pub fn discrete_gaussian_restricted(mu: [f64; 2], sigma: [[f64; 2]; 2], window: Window) -> Result<GaussianTable> {
    if window.lo[0] > window.hi[0] || window.lo[1] > window.hi[1] {
        return Err(Error::Window("empty window".into()));
    }
    let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
    if !(det > 0.0 && sigma[0][0] > 0.0) || (sigma[0][1] - sigma[1][0]).abs() > 1e-12 * sigma[0][0].abs().max(1.0) {
        return Err(Error::Window("covariance must be symmetric positive definite".into()));
    }
    let inv = [[sigma[1][1] / det, -sigma[0][1] / det], [-sigma[1][0] / det, sigma[0][0] / det]];
    let q = |e: [f64; 2]| {
        let d = [e[0] - mu[0], e[1] - mu[1]];
        d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1])
    };
    let cut = 60.0 / (PI / 2.0);
    let h1 = (cut * sigma[0][0]).sqrt() + 1.0;
    let h2 = (cut * sigma[1][1]).sqrt() + 1.0;
    let mut total = 0.0;
    let mut inside = 0.0;
    for a in ((mu[0] - h1).floor() as i64)..=((mu[0] + h1).ceil() as i64) {
        for b in ((mu[1] - h2).floor() as i64)..=((mu[1] + h2).ceil() as i64) {
            let m = (-PI / 2.0 * q([a as f64, b as f64])).exp();
            total += m;
            if window.contains([a, b]) {
                inside += m;
            }
        }
    }
    let probs = window
        .points()
        .into_iter()
        .map(|e| (e, (-PI / 2.0 * q([e[0] as f64, e[1] as f64])).exp() / total))
        .collect();
    Ok(GaussianTable { window, probs, tail_mass: ((total - inside) / total).max(0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tau(re: f64, im: f64) -> Tau {
        Tau::new(c(re, im)).unwrap()
    }

    #[test]
    fn series_matches_product() {
        for &t in &[tau(0.0, 1.0), tau(0.3, 0.7), tau(-0.45, 2.1)] {
            for &nu in &[c(0.1, 0.0), c(0.37, -0.2), c(-0.8, 0.3)] {
                for ch in Char::ALL {
                    let a = theta(ch, nu, t).unwrap();
                    let b = theta_product(ch, nu, t).unwrap();
                    assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()), "{ch:?} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn eta_frozen_value() {
        // Gamma(1/4) / (2 pi^{3/4})
        let e = eta(tau(0.0, 1.0)).unwrap();
        assert!((e.re - 0.768225422326057).abs() < 1e-14);
        assert!(e.im.abs() < 1e-15);
    }

    #[test]
    fn eta_modular() {
        let t = c(0.21, 0.83);
        let e = eta(Tau::new(t).unwrap()).unwrap();
        let e1 = eta(Tau::new(t + 1.0).unwrap()).unwrap();
        assert!((e1 - (I * PI / 12.0).exp() * e).norm() < 1e-13);
        let es = eta(Tau::new(-1.0 / t).unwrap()).unwrap();
        assert!((es - (-I * t).sqrt() * e).norm() < 1e-13);
    }

    #[test]
    fn quasi_periodicity_and_half_shifts() {
        let t = tau(0.2, 0.9);
        let tv = t.value();
        let nu = c(0.13, 0.05);
        let th = |ch, v| theta(ch, v, t).unwrap();
        let lhs = th(Char::C00, nu + tv);
        let rhs = (-I * PI * (2.0 * nu + tv)).exp() * th(Char::C00, nu);
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
        assert!((th(Char::C00, nu + 0.5) - th(Char::C01, nu)).norm() < 1e-12);
        let f = (-I * PI * (nu + tv / 4.0)).exp();
        assert!((th(Char::C00, nu + tv / 2.0) - f * th(Char::C10, nu)).norm() < 1e-12);
        assert!((th(Char::C00, nu + (1.0 + tv) / 2.0) + I * f * th(Char::C11, nu)).norm() < 1e-12);
    }

    #[test]
    fn xi_definition_and_shift() {
        let t = tau(0.1, 1.3);
        let z = Complex64::from_polar(1.0, 0.7);
        let x = Complex64::from_polar(1.0, -2.2);
        let (phi, psi) = phase_coords(z, x);
        for ch in Char::ALL {
            let direct = (theta(ch, phi * t.value() - psi, t).unwrap() * (I * PI * t.value() * phi * phi).exp()
                / eta(t).unwrap())
            .norm();
            assert!((xi(ch, z, x, t).unwrap() - direct).abs() < 1e-12);
        }
        assert!(xi(Char::C11, c(-1.0, 0.0), c(-1.0, 0.0), t).unwrap() < 1e-14);
        assert!((xi(Char::C00, z.conj(), x.conj(), t).unwrap() - xi(Char::C00, z, x, t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn modular_relations() {
        let t = tau(0.27, 0.8);
        let z = Complex64::from_polar(1.0, 1.1);
        let x = Complex64::from_polar(1.0, 0.4);
        for ch in Char::ALL {
            let a = xi(ch, z, x, t).unwrap();
            let tt = Tau::new(t.value() + 1.0).unwrap();
            let b = xi(Char(ch.0, (ch.0 + ch.1) % 2), z, z * x, tt).unwrap();
            assert!((a - b).abs() < 1e-12, "T {ch:?}");
            let ts = Tau::new(-1.0 / t.value()).unwrap();
            let s = xi(Char(ch.1, ch.0), x.conj(), z, ts).unwrap();
            assert!((a - s).abs() < 1e-12, "S {ch:?}");
        }
    }

    #[test]
    fn reduction_agrees() {
        let z = Complex64::from_polar(1.0, 2.0);
        let x = Complex64::from_polar(1.0, -0.3);
        for &t in &[tau(3.4, 0.2), tau(-0.7, 0.05), tau(0.1, 0.6)] {
            let a = xi_reduced(Char::C01, z, x, t).unwrap();
            let b = xi(Char::C01, z, x, t).unwrap();
            assert!((a - b).abs() < 1e-11 * b.max(1.0), "{t:?} {a} {b}");
        }
        assert!(xi(Char::C00, z, x, tau(0.0, 1e-4)).is_err());
        assert!(xi_reduced(Char::C00, z, x, tau(0.0, 1e-4)).unwrap().is_finite());
    }

    #[test]
    fn gaussian_square_identity() {
        let t = tau(0.15, 0.9);
        let z = Complex64::from_polar(1.0, 0.9);
        let x = Complex64::from_polar(1.0, 2.5);
        for ch in Char::ALL {
            let d = xi(ch, z, x, t).unwrap().powi(2);
            let g = xi_sq_gaussian(ch, z, x, t).unwrap();
            assert!((d - g).abs() < 1e-12 * (1.0 + d), "{ch:?} {d} {g}");
        }
    }

    #[test]
    fn cross_products() {
        let t = tau(0.2, 0.75);
        let tv = t.value();
        let x = |ch, tt: Complex64| xi_const(ch, Tau::new(tt).unwrap()).unwrap();
        assert!((x(Char::C00, tv) * x(Char::C01, tv) - x(Char::C01, 2.0 * tv)).abs() < 1e-12);
        assert!((x(Char::C00, tv) * x(Char::C10, tv) - x(Char::C10, tv / 2.0)).abs() < 1e-12);
        assert!((x(Char::C01, tv) * x(Char::C10, tv) - x(Char::C10, (1.0 + tv) / 2.0)).abs() < 1e-12);
        let pairs = [(Char::C00, Char::C01), (Char::C00, Char::C10), (Char::C01, Char::C10)];
        for (a, b) in pairs {
            {
                let p = x(a, tv) * x(b, tv);
                let g = xi_pair_gaussian(a, b, t).unwrap();
                assert!((p - g).abs() < 1e-12, "{a:?}{b:?} {p} {g}");
            }
        }
    }

    #[test]
    fn discrete_gaussian_normalised() {
        let t = discrete_gaussian([0.3, -0.2], [[0.8, 0.1], [0.1, 0.5]], Window::square(8)).unwrap();
        let s: f64 = t.probs.iter().map(|p| p.1).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(discrete_gaussian([0.0, 0.0], [[9.0, 0.0], [0.0, 9.0]], Window::square(1)).is_err());
    }
}
