//! Independent oracles: brute-force spin sums and hand-counted dimer covers.

use torusdimer::fsc;
use torusdimer::kasteleyn::{self, Method};
use torusdimer::lattice::{self, Weights};
use torusdimer::torus::TorusSpec;

/// `log sum_sigma exp(sum beta_k s_i s_{i+d_k})` on the `m x n` periodic triangular lattice,
/// bonds `a = (1,0)`, `b = (0,1)`, `c = (1,-1)`.
fn ising_brute_force(m: i64, n: i64, beta: [f64; 3]) -> f64 {
    let dirs = [[1, 0], [0, 1], [1, -1]];
    let idx = |i: i64, j: i64| (i.rem_euclid(m) * n + j.rem_euclid(n)) as usize;
    let sites = (m * n) as usize;
    let mut z = 0.0;
    for conf in 0u64..(1 << sites) {
        let spin = |k: usize| if conf >> k & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for i in 0..m {
            for j in 0..n {
                for (d, b) in dirs.iter().zip(beta) {
                    e += b * spin(idx(i, j)) * spin(idx(i + d[0], j + d[1]));
                }
            }
        }
        z += e.exp();
    }
    z.ln()
}

#[test]
fn ising_partition_function_matches_spin_sum() {
    let critical = 0.5 * (2f64.sqrt() + 1.0).ln();
    for beta in [[0.31, 0.17, 0.45], [critical, critical, 0.0], [-0.2, 0.4, 0.1]] {
        for (m, n) in [(2, 3), (3, 3), (3, 4), (4, 4)] {
            let rep = fsc::ising_critical_check(beta, &[TorusSpec::diag(m, n).unwrap()]).unwrap();
            let got = rep.tori[0].log_ising_z;
            let want = ising_brute_force(m, n, beta);
            assert!((got - want).abs() < 1e-9, "{beta:?} {m}x{n}: {got} vs {want}");
        }
    }
}

/// Weighted dimer covers of the `m x n` periodic square grid, horizontal weight `a`,
/// vertical `b`, by recursion on the first free site. Parallel edges count separately.
fn square_covers(m: usize, n: usize, a: f64, b: f64) -> f64 {
    let mut edges = Vec::new();
    for i in 0..m {
        for j in 0..n {
            edges.push((i * n + j, i * n + (j + 1) % n, a));
            edges.push((i * n + j, ((i + 1) % m) * n + j, b));
        }
    }
    fn go(used: &mut Vec<bool>, edges: &[(usize, usize, f64)]) -> f64 {
        let Some(v) = used.iter().position(|u| !u) else { return 1.0 };
        let mut total = 0.0;
        for &(p, q, w) in edges {
            let other = if p == v { q } else if q == v { p } else { continue };
            if other == v || used[other] {
                continue;
            }
            used[v] = true;
            used[other] = true;
            total += w * go(used, edges);
            used[v] = false;
            used[other] = false;
        }
        total
    }
    go(&mut vec![false; m * n], &edges)
}

#[test]
fn square_tori_match_recursive_count() {
    assert_eq!(square_covers(4, 4, 1.0, 1.0), 272.0);
    let (a, b) = (1.3, 0.6);
    let d = lattice::builtin("square-1x1", &[("a".to_string(), a), ("b".to_string(), b)].into_iter().collect()).unwrap();
    for (m, n) in [(2, 2), (2, 3), (3, 2), (2, 5), (4, 4), (3, 4), (4, 5), (6, 4)] {
        let want = square_covers(m, n, a, b);
        // rows of E are the horizontal and vertical periods
        let t = TorusSpec::diag(n as i64, m as i64).unwrap();
        let st = fsc::exact_sector_table(&d, &t, Method::Dense).unwrap().unwrap();
        assert!((st.z.value() - want).abs() < 1e-9 * want, "{m}x{n}: {} vs {want}", st.z.value());
    }
}

#[test]
fn hexagonal_unit_torus_counts() {
    // the 1x1 honeycomb torus has its three edges as the only covers
    let d = lattice::builtin("hexagonal", &Weights::new()).unwrap();
    let st = kasteleyn::sector_table(&d, &TorusSpec::identity(), Method::Dense).unwrap();
    assert!((st.z.value() - 3.0).abs() < 1e-12);
    let en = kasteleyn::enumerate_matchings(&d, &TorusSpec::diag(3, 3).unwrap()).unwrap();
    let st = kasteleyn::sector_table(&d, &TorusSpec::diag(3, 3).unwrap(), Method::Dense).unwrap();
    assert!((en.z - st.z.value()).abs() < 1e-9 * en.z);
}
