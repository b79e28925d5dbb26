//! Property tests of the structural invariants.

use num_complex::Complex64;
use proptest::prelude::*;
use torusdimer::charpoly;
use torusdimer::fsc;
use torusdimer::kasteleyn::{self, Method};
use torusdimer::lattice::{self, Weights, BUILTIN_NAMES};
use torusdimer::linalg;
use torusdimer::special_fn::{self, Tau, Window};
use torusdimer::torus::TorusSpec;

fn weights(name: &str, a: f64, b: f64, c: f64) -> Weights {
    let mut w = Weights::new();
    w.insert("a".into(), a);
    w.insert("b".into(), b);
    if !name.starts_with("square") {
        w.insert("c".into(), c);
    }
    w
}

fn even_lattice() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["square-2x1", "square-1x2", "square-bip", "hexagonal", "fisher", "rhombi-3464"])
}

/// Tori with small entries and `1 <= det <= max_det`.
fn torus(max_det: i64) -> impl Strategy<Value = TorusSpec> {
    prop::array::uniform4(-3i64..=3).prop_filter_map("det out of range", move |[u, v, x, y]| {
        let det = u * y - v * x;
        (1..=max_det).contains(&det).then(|| TorusSpec::from_entries(u, v, x, y).unwrap())
    })
}

fn weight() -> impl Strategy<Value = f64> {
    0.3f64..3.0
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn pfaffian_squared_is_determinant(
        name in even_lattice(), t in torus(6), a in weight(), b in weight(), c in weight(),
        sign in 0usize..4,
    ) {
        // K_E is skew only at the real sign pairs
        let d = lattice::builtin(name, &weights(name, a, b, c)).unwrap();
        let (s1, s2) = kasteleyn::SIGNS[sign];
        let k = kasteleyn::build_ke(&d, &t, Complex64::new(s1, 0.0), Complex64::new(s2, 0.0)).unwrap();
        let pf = linalg::pfaffian(&k).unwrap().value();
        let det = linalg::det(&k);
        prop_assert!((pf * pf - det).norm() <= 1e-9 * (1.0 + det.norm()), "{} vs {}", pf * pf, det);
    }

    #[test]
    fn vertex_gauge_changes_only_a_common_sign(
        name in even_lattice(), t in torus(5), v in 0usize..6, a in weight(), b in weight(), c in weight(),
    ) {
        let d = lattice::builtin(name, &weights(name, a, b, c)).unwrap();
        let g = d.flip_vertex(v % d.k());
        let p0 = kasteleyn::dense_pfaffians(&d, &t).unwrap();
        let p1 = kasteleyn::dense_pfaffians(&g, &t).unwrap();
        let sign = if t.det() % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..4 {
            let (x, y) = (p0[i].value(), p1[i].value());
            prop_assert!((y - sign * x).abs() <= 1e-9 * (1.0 + x.abs()), "{i}: {x} vs {y}");
        }
    }

    #[test]
    fn sectors_are_nonnegative_and_sum_to_z(
        name in even_lattice(), t in torus(12), a in weight(), b in weight(), c in weight(),
    ) {
        let d = lattice::builtin(name, &weights(name, a, b, c)).unwrap();
        let st = kasteleyn::sector_table(&d, &t, Method::Dense).unwrap();
        prop_assert!(st.min_sector_ratio > -1e-10, "{}", st.min_sector_ratio);
        let z = st.z.value();
        let sum: f64 = st.sector_values().iter().sum();
        prop_assert!((sum - z).abs() <= 1e-10 * z);
    }

    #[test]
    fn residue_system_has_det_elements(t in torus(36)) {
        let r = t.residues();
        prop_assert_eq!(r.len() as i64, t.det());
        let mut s = r.clone();
        s.sort();
        s.dedup();
        prop_assert_eq!(s.len(), r.len());
    }

    #[test]
    fn fsc2_modular_covariance(
        re in -0.5f64..0.5, im in 0.5f64..2.0, r in -1.0f64..1.0, s in -1.0f64..1.0, k in -3i64..=3,
    ) {
        let tau = Tau::new(Complex64::new(re, im)).unwrap();
        let ph = |x: f64| Complex64::from_polar(1.0, std::f64::consts::PI * x);
        let base = fsc::fsc2(ph(r), ph(s), tau).unwrap().value;
        // T^k: tau -> tau + k with (zeta, xi) -> (zeta, zeta^k xi)
        let tk = Tau::new(tau.value() + k as f64).unwrap();
        let shifted = fsc::fsc2(ph(r), ph(s + k as f64 * r), tk).unwrap().value;
        prop_assert!((base - shifted).abs() < 1e-10, "{base} vs {shifted}");
        // S: tau -> -1/tau with (zeta, xi) -> (xi, 1/zeta)
        let st = Tau::new(-1.0 / tau.value()).unwrap();
        let swapped = fsc::fsc2(ph(s), ph(-r), st).unwrap().value;
        prop_assert!((base - swapped).abs() < 1e-10, "{base} vs {swapped}");
    }

    #[test]
    fn discrete_gaussian_is_normalised(
        m0 in -2.0f64..2.0, m1 in -2.0f64..2.0, a in 0.3f64..3.0, c in 0.3f64..3.0, rho in -0.8f64..0.8,
    ) {
        let b = rho * (a * c).sqrt();
        let g = special_fn::discrete_gaussian([m0, m1], [[a, b], [b, c]], Window::square(14)).unwrap();
        let total: f64 = g.probs.iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(g.probs.iter().all(|p| p.1 >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn winding_covariance_is_positive_definite(
        lat in prop::sample::select(vec!["hexagonal", "square-bip"]), t in torus(36),
        a in 0.6f64..1.6, b in 0.6f64..1.6, c in 0.6f64..1.6,
    ) {
        let d = lattice::builtin(lat, &weights(lat, a, b, c)).unwrap();
        let cp = charpoly::build(&d).unwrap();
        let class = charpoly::find_nodes(&cp, &Default::default()).unwrap();
        // hexagonal weights off the triangle inequality are gaseous: no law
        if let Ok(law) = fsc::winding_law(&cp, &class, &t) {
            let s = law.sigma;
            prop_assert!((s[0][1] - s[1][0]).abs() < 1e-12);
            prop_assert!(s[0][0] > 0.0 && s[0][0] * s[1][1] - s[0][1] * s[1][0] > 0.0, "{s:?}");
        }
    }
}

#[test]
fn every_builtin_is_listed_and_oriented() {
    for name in BUILTIN_NAMES {
        let d = lattice::builtin(name, &Weights::new()).unwrap();
        let dd = if d.k() % 2 == 0 { d } else { lattice::double_domain(&d, lattice::Doubling::Diagonal).unwrap() };
        assert!(lattice::verify_orientation(&dd).is_oriented(), "{name}");
    }
}
