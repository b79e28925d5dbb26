use crate::output::{complex, log_of, log_value, matrix2, num, nums, Obj, Report, Table};
use crate::{parse_floats, parse_torus, parse_weights, CliError, CliResult, Command, LatticeArgs, MethodArg};
use serde_json::Value;
use torusdimer::charpoly::{self, CharPoly, CriticalityClass, NodeKind, NodeOptions, NodeReport};
use torusdimer::fsc::{self, Cover};
use torusdimer::kasteleyn::{self, Method, SectorTable, AUTO_DENSE_LIMIT};
use torusdimer::lattice::{self, Doubling, FundamentalDomain};
use torusdimer::special_fn::{self, Window};
use torusdimer::torus::TorusSpec;

pub fn dispatch(cmd: &Command, opts: &NodeOptions) -> CliResult<Report> {
    match cmd {
        Command::Partition { lattice, torus, method, predict, dump_matrix } => {
            partition(&lattice.load()?, &parse_torus(&torus.e)?, *method, *predict, *dump_matrix, opts)
        }
        Command::Sectors { lattice, torus, method, dump_matrix } => {
            sectors(&lattice.load()?, &parse_torus(&torus.e)?, *method, *dump_matrix, opts)
        }
        Command::Winding { lattice, torus, window, dft, dense } => {
            winding(&lattice.load()?, &parse_torus(&torus.e)?, *window, *dft, *dense, opts)
        }
        Command::Criticality { lattice } => criticality(lattice, opts),
        Command::FscCurve { lattice, family, range } => fsc_curve(lattice, family, range, opts),
        Command::Verify { lattice, max_entry, max_det, max_vertices, tol } => {
            verify(&lattice.load()?, *max_entry, *max_det, *max_vertices, *tol)
        }
        Command::Ising { beta, e } => ising(beta.as_deref(), e),
    }
}

fn e_json(t: &TorusSpec) -> Value {
    let e = t.e();
    Value::Array(e.iter().map(|r| Value::Array(r.iter().map(|&c| Value::from(c)).collect())).collect())
}

fn doubling_name(d: Option<Doubling>) -> Value {
    match d {
        None => Value::Null,
        Some(Doubling::Horizontal) => "horizontal".into(),
        Some(Doubling::Vertical) => "vertical".into(),
        Some(Doubling::Diagonal) => "diagonal".into(),
    }
}

fn kind_name(k: NodeKind) -> &'static str {
    match k {
        NodeKind::RealNode => "real-node",
        NodeKind::ConjugatePairMember => "conjugate-pair-member",
        NodeKind::RealRootOfQNode => "real-root-of-q",
    }
}

fn node_json(n: &NodeReport) -> Value {
    Obj::new()
        .put("r", num(n.r))
        .put("s", num(n.s))
        .put("z", complex(n.z.re, n.z.im))
        .put("w", complex(n.w.re, n.w.im))
        .put("hessian", matrix2(n.hessian))
        .put("tau", complex(n.tau.re, n.tau.im))
        .put("kind", kind_name(n.kind))
        .into()
}

fn classify(d: &FundamentalDomain, opts: &NodeOptions) -> CliResult<(CharPoly, CriticalityClass)> {
    let cp = charpoly::build(d)?;
    let class = charpoly::find_nodes(&cp, opts)?;
    Ok((cp, class))
}

/// The even-k domain used for `d`: `d` itself or its preferred doubling.
fn even_domain(d: &FundamentalDomain) -> CliResult<(FundamentalDomain, Option<Doubling>)> {
    if d.k() % 2 == 0 {
        Ok((d.clone(), None))
    } else {
        Ok((lattice::double_domain(d, Doubling::Diagonal)?, Some(Doubling::Diagonal)))
    }
}

fn table_on_cover(c: &Cover, method: MethodArg, opts: &NodeOptions) -> CliResult<SectorTable> {
    let n = c.domain.k() * c.torus.det() as usize;
    let dense = match method {
        MethodArg::Dense => true,
        MethodArg::Fast => false,
        MethodArg::Auto => n <= AUTO_DENSE_LIMIT,
    };
    if dense {
        Ok(kasteleyn::sector_table(&c.domain, &c.torus, Method::Dense)?)
    } else {
        let (cp, class) = classify(&c.domain, opts)?;
        Ok(kasteleyn::fast_sector_table(&cp, &class, &c.torus)?)
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Auto => "auto",
        Method::Dense => "dense",
        Method::Fast => "fast",
    }
}

fn cover_json(c: &Option<Cover>) -> Value {
    match c {
        None => Value::Null,
        Some(c) => Obj::new()
            .put("doubling", doubling_name(c.doubling))
            .put("E", e_json(&c.torus))
            .put("vertices", c.domain.k() as i64 * c.torus.det())
            .into(),
    }
}

fn matrix_dump(c: &Option<Cover>) -> CliResult<Value> {
    let Some(c) = c else { return Ok(Value::Array(vec![])) };
    let m = kasteleyn::build_ke_real(&c.domain, &c.torus, 1.0, 1.0)?;
    let n = c.domain.k() * c.torus.det() as usize;
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = m[i * n + j];
            if v != 0.0 {
                trip.push(Value::Array(vec![i.into(), j.into(), num(v)]));
            }
        }
    }
    Ok(Value::Array(trip))
}

fn partition(
    d: &FundamentalDomain,
    t: &TorusSpec,
    method: MethodArg,
    predict: bool,
    dump: bool,
    opts: &NodeOptions,
) -> CliResult<Report> {
    let cover = fsc::even_cover(d, t)?;
    let table = cover.as_ref().map(|c| table_on_cover(c, method, opts)).transpose()?;
    let mut o = Obj::new()
        .put("lattice", d.name())
        .put("E", e_json(t))
        .put("det", t.det())
        .put("vertices", d.k() as i64 * t.det());
    match &table {
        Some(st) => {
            o.set("Z", log_value(st.z));
            o.set("log_Z", log_of(st.z));
            o.set("method", method_name(st.method));
        }
        None => {
            o.set("Z", num(0.0));
            o.set("log_Z", Value::Null);
            o.set("method", "no-cover");
        }
    }
    o.set("cover", cover_json(&cover));
    if predict {
        o.set("prediction", prediction_json(cover.as_ref(), opts)?);
    }
    if dump {
        o.set("matrix", matrix_dump(&cover)?);
    }
    Ok(Report { json: o.into(), table: None, failed: false })
}

fn prediction_json(cover: Option<&Cover>, opts: &NodeOptions) -> CliResult<Value> {
    let Some(c) = cover else {
        return Ok(Obj::new().put("class", "no-cover").put("log_Z", Value::Null).into());
    };
    let (cp, class) = classify(&c.domain, opts)?;
    let p = fsc::predict_from(&cp, &class, &c.torus, c.doubling)?;
    let mut o = Obj::new().put("class", p.class).put("f0", num(p.f0)).put("det", p.det);
    match &p.fsc {
        Some(f) => {
            o.set("fsc", num(f.value));
            o.set("tau", complex(f.tau.re, f.tau.im));
            o.set("r_E", num(f.r_e));
            o.set("s_E", num(f.s_e));
        }
        None => o.set("fsc", Value::Null),
    }
    o.set("log_Z", log_of(p.log_z));
    Ok(o.into())
}

const SECTOR_NAMES: [&str; 4] = ["Z00", "Z10", "Z01", "Z11"];

fn sectors(d: &FundamentalDomain, t: &TorusSpec, method: MethodArg, dump: bool, opts: &NodeOptions) -> CliResult<Report> {
    let cover = fsc::even_cover(d, t)?;
    let table = cover.as_ref().map(|c| table_on_cover(c, method, opts)).transpose()?;
    let mut o = Obj::new();
    let mut rows = Vec::new();
    let mut logs = Obj::new();
    match &table {
        Some(st) => {
            for (name, s) in SECTOR_NAMES.iter().zip(st.sectors) {
                o.set(name, log_value(s));
                logs.set(name, log_of(s));
                rows.push(vec![Value::from(*name), log_value(s), log_of(s)]);
            }
            o.set("Z", log_value(st.z));
            logs.set("Z", log_of(st.z));
            rows.push(vec!["Z".into(), log_value(st.z), log_of(st.z)]);
        }
        None => {
            for name in SECTOR_NAMES.iter().chain(&["Z"]) {
                o.set(name, num(0.0));
                logs.set(name, Value::Null);
                rows.push(vec![Value::from(*name), num(0.0), Value::Null]);
            }
        }
    }
    o.set("log", logs);
    if let Some(st) = &table {
        let pf: Vec<Value> = st
            .pf
            .iter()
            .map(|p| {
                let zero = p.is_zero();
                Obj::new()
                    .put("sign", if zero { num(0.0) } else { num(p.sign()) })
                    .put("log_abs", if zero { Value::Null } else { num(p.log_abs) })
                    .into()
            })
            .collect();
        o.set("pf", Value::Array(pf));
        o.set("method", method_name(st.method));
        o.set("min_sector_ratio", num(st.min_sector_ratio));
    }
    o.set("lattice", d.name());
    o.set("E", e_json(t));
    o.set("cover", cover_json(&cover));
    if dump {
        o.set("matrix", matrix_dump(&cover)?);
    }
    let table = Table { header: vec!["sector", "value", "log"], rows };
    Ok(Report { json: o.into(), table: Some(table), failed: false })
}

fn winding(d: &FundamentalDomain, t: &TorusSpec, h: i64, dft: usize, dense: bool, opts: &NodeOptions) -> CliResult<Report> {
    if h < 0 {
        return Err(CliError::Domain("--window must be nonnegative".into()));
    }
    if !d.is_bipartite() {
        return Err(torusdimer::error::Error::NotBipartite.into());
    }
    let (cp, class) = classify(d, opts)?;
    let law = fsc::winding_law(&cp, &class, t)?;
    let c = law.mu.map(|m| m.round() as i64);
    let window = Window { lo: [c[0] - h, c[1] - h], hi: [c[0] + h, c[1] + h] };
    let how = if dense { kasteleyn::WindingMethod::Dense } else { kasteleyn::WindingMethod::Product };
    let exact = kasteleyn::winding_distribution(d, t, window, dft, how)?;
    let gauss = special_fn::discrete_gaussian_restricted(law.mu, law.sigma, window)?;
    let mut tv = 0.0;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for ((w, pe), (_, pg)) in exact.probs.iter().zip(&gauss.probs) {
        tv += 0.5 * (pe - pg).abs();
        rows.push(vec![w[0].into(), w[1].into(), num(*pe), num(*pg)]);
        entries.push(Obj::new().put("w", vec![w[0], w[1]]).put("exact", num(*pe)).put("predicted", num(*pg)).into());
    }
    let law_json = Obj::new()
        .put("mu", nums(&law.mu))
        .put("sigma", matrix2(law.sigma))
        .put("ell", vec![law.ell[0], law.ell[1]])
        .put("color_swapped", law.color_swapped)
        .put("node", nums(&[law.node.r, law.node.s]));
    let o = Obj::new()
        .put("lattice", d.name())
        .put("E", e_json(t))
        .put("law", law_json)
        .put("window", Obj::new().put("lo", window.lo.to_vec()).put("hi", window.hi.to_vec()))
        .put("dft", dft)
        .put("tv", num(tv))
        .put("exact_mass", num(exact.mass()))
        .put("gaussian_tail_mass", num(gauss.tail_mass))
        .put("table", Value::Array(entries));
    let table = Table { header: vec!["w1", "w2", "exact", "predicted"], rows };
    Ok(Report { json: o.into(), table: Some(table), failed: false })
}

fn criticality(args: &LatticeArgs, opts: &NodeOptions) -> CliResult<Report> {
    let d = args.load()?;
    let (dd, doubling) = even_domain(&d)?;
    let (cp, class) = classify(&dd, opts)?;
    let mut o = Obj::new()
        .put("lattice", d.name())
        .put("k", d.k())
        .put("doubling", doubling_name(doubling))
        .put("bipartite", dd.is_bipartite())
        .put("class", class.label());
    let nodes: Vec<Value> = class.nodes().iter().map(node_json).collect();
    let mut rows: Vec<Vec<Value>> = class
        .nodes()
        .iter()
        .map(|n| vec![class.label().into(), num(n.r), num(n.s), kind_name(n.kind).into(), num(n.tau.re), num(n.tau.im)])
        .collect();
    o.set("nodes", Value::Array(nodes));
    if let CriticalityClass::DistinctConjugateNodes(pair) = &class {
        if dd.is_bipartite() {
            let dist = charpoly::distinguish_conjugate_node(&cp, pair)?;
            o.set(
                "distinguished",
                Obj::new()
                    .put("r", num(dist.node.r))
                    .put("s", num(dist.node.s))
                    .put("ell", vec![dist.ell[0], dist.ell[1]])
                    .put("color_swapped", dist.swapped),
            );
        }
    }
    o.set("f0", num(charpoly::free_energy(&cp)?));
    if matches!(d.name(), "fisher" | "rhombi-3464") {
        let w = parse_weights(args.weights.as_deref())?;
        let g = |k: &str| w.get(k).copied().unwrap_or(1.0);
        let k = charpoly::kappa(d.name(), g("a"), g("b"), g("c"))?;
        o.set("kappa", nums(&k));
    }
    if rows.is_empty() {
        rows.push(vec![class.label().into(), Value::Null, Value::Null, Value::Null, Value::Null, Value::Null]);
    }
    let table = Table { header: vec!["class", "r", "s", "kind", "tau_re", "tau_im"], rows };
    Ok(Report { json: o.into(), table: Some(table), failed: false })
}

fn parse_range(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Domain(format!("--range `{s}`: expected lo:hi:count"));
    let [lo, hi, n] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || (n > 1 && hi < lo) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn fsc_curve(args: &LatticeArgs, family: &str, range: &str, opts: &NodeOptions) -> CliResult<Report> {
    if !matches!(family, "(m,n)-grid" | "mn-grid" | "rectilinear") {
        return Err(CliError::Domain(format!("unknown family `{family}`; only (m,n)-grid is available")));
    }
    let log_rhos = parse_range(range)?;
    let d = args.load()?;
    let unit = parse_weights(args.weights.as_deref())?.values().all(|&w| w == 1.0);
    let points = if d.name() == "square-1x1" && unit {
        fsc::square_curves(&log_rhos)?
    } else {
        let (dd, _) = even_domain(&d)?;
        let (_, class) = classify(&dd, opts)?;
        fsc::phase_curves(&class, &log_rhos)?
    };
    let mut rows = Vec::new();
    let mut pts = Vec::new();
    for p in &points {
        rows.push(vec![num(p.log_rho), p.class.clone().into(), log_of(p.fsc)]);
        pts.push(
            Obj::new()
                .put("log_rho", num(p.log_rho))
                .put("class", p.class.clone())
                .put("function", p.function.clone())
                .put("fsc", log_of(p.fsc))
                .into(),
        );
    }
    let o = Obj::new().put("lattice", d.name()).put("family", "(m,n)-grid").put("points", Value::Array(pts));
    let table = Table { header: vec!["log_rho", "class", "fsc"], rows };
    Ok(Report { json: o.into(), table: Some(table), failed: false })
}

fn verify(d: &FundamentalDomain, max_entry: i64, max_det: i64, max_vertices: usize, tol: f64) -> CliResult<Report> {
    if !(tol > 0.0) || max_entry < 1 || max_det < 1 {
        return Err(CliError::Domain("verify: tolerances and bounds must be positive".into()));
    }
    let (dd, doubling) = even_domain(d)?;
    let rep = lattice::verify_orientation(&dd);
    let mut tori = 0usize;
    let mut max_err = 0.0f64;
    let mut failures = Vec::new();
    let m = max_entry;
    for u in -m..=m {
        for v in -m..=m {
            for x in -m..=m {
                for y in -m..=m {
                    let det = u * y - v * x;
                    if det < 1 || det > max_det || d.k() * det as usize > max_vertices {
                        continue;
                    }
                    let t = TorusSpec::from_entries(u, v, x, y)?;
                    let Some(c) = fsc::even_cover(d, &t)? else { continue };
                    let en = kasteleyn::enumerate_matchings(&c.domain, &c.torus)?;
                    let st = kasteleyn::sector_table(&c.domain, &c.torus, Method::Dense)?;
                    let got = st.sector_values();
                    let scale = en.z.max(f64::MIN_POSITIVE);
                    let mut err = (st.z.value() - en.z).abs() / scale;
                    for i in 0..4 {
                        err = err.max((got[i] - en.sectors[i]).abs() / scale);
                    }
                    tori += 1;
                    max_err = max_err.max(err);
                    if err > tol {
                        failures.push(Obj::new().put("E", e_json(&t)).put("rel_err", num(err)).into());
                    }
                }
            }
        }
    }
    let pass = rep.is_oriented() && failures.is_empty();
    let o = Obj::new()
        .put("lattice", d.name())
        .put("doubling", doubling_name(doubling))
        .put(
            "orientation",
            Obj::new()
                .put("kasteleyn", rep.kasteleyn)
                .put("reference_positive", rep.reference_positive)
                .put("sectors_consistent", rep.sectors_consistent)
                .put("offending", rep.offending.clone()),
        )
        .put(
            "sweep",
            Obj::new().put("tori", tori).put("max_rel_err", num(max_err)).put("tol", num(tol)).put("failures", Value::Array(failures)),
        )
        .put("pass", pass);
    Ok(Report { json: o.into(), table: None, failed: !pass })
}

fn ising(beta: Option<&str>, es: &[String]) -> CliResult<Report> {
    let beta = match beta {
        None => {
            let b = 0.5 * (2f64.sqrt() + 1.0).ln();
            [b, b, 0.0]
        }
        Some(s) => {
            let v = parse_floats(s, "--beta")?;
            let [a, b, c] = v[..] else {
                return Err(CliError::Domain(format!("--beta needs three couplings, got {}", v.len())));
            };
            [a, b, c]
        }
    };
    let tori: Vec<TorusSpec> = if es.is_empty() {
        vec![TorusSpec::diag(2, 2)?, TorusSpec::diag(4, 4)?]
    } else {
        es.iter().map(|s| parse_torus(s)).collect::<CliResult<_>>()?
    };
    let rep = fsc::ising_critical_check(beta, &tori)?;
    let names = ["k0", "ka", "kb", "kc"];
    let sector_names = ["00", "10", "01", "11"];
    let mut rows = Vec::new();
    let checks: Vec<Value> = rep
        .tori
        .iter()
        .map(|c| {
            let t = TorusSpec::new(c.e).expect("checked torus");
            let sector: Value = if rep.vanishing.is_some() { sector_names[c.sector].into() } else { Value::Null };
            rows.push(vec![
                format!("{},{},{},{}", c.e[0][0], c.e[0][1], c.e[1][0], c.e[1][1]).into(),
                num(c.log_z),
                sector.clone(),
                num(c.rel_err),
                num(c.log_ising_z),
            ]);
            Obj::new()
                .put("E", e_json(&t))
                .put("log_Z", num(c.log_z))
                .put("sector", sector)
                .put("rel_err", num(c.rel_err))
                .put("log_ising_Z", num(c.log_ising_z))
                .into()
        })
        .collect();
    let o = Obj::new()
        .put("beta", nums(&rep.beta))
        .put("weights", nums(&rep.weights))
        .put("kappa", nums(&rep.kappa))
        .put("vanishing", rep.vanishing.map_or(Value::Null, |i| names[i].into()))
        .put("line", rep.line)
        .put("tori", Value::Array(checks));
    let table = Table { header: vec!["E", "log_Z", "sector", "rel_err", "log_ising_Z"], rows };
    Ok(Report { json: o.into(), table: Some(table), failed: false })
}
