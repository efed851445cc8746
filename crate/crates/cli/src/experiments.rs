//! One function per experiment. Each returns its table and a JSON summary
//! without touching the disk.

use std::fmt::Write as _;

use serde_json::{json, Value};
use ssep_core::hydro;
use ssep_core::profiles::{block, make_dic, sample_lem, sample_product, Configuration, Profile};
use ssep_core::ratefn::{self, InitKind, RateOptions};
use ssep_core::simulator::{default_half_width, par_samples, run, SimOptions, TrajectorySample};
use ssep_core::stats::{summarize, weighted_line, wilson};
use ssep_core::trialbounds::{self, CurveKind};
use ssep_core::varprob;

use crate::config::*;
use crate::CliError;

/// Table (header line first, no comment line) and scalar results.
#[derive(Debug, Clone)]
pub struct Report {
    pub csv: String,
    pub summary: Value,
    /// Set when an identity check failed; outputs are still written.
    pub identity_failure: bool,
}

impl Report {
    fn new(csv: String, summary: Value) -> Self {
        Self {
            csv,
            summary,
            identity_failure: false,
        }
    }
}

pub fn run_experiment(r: &Resolved) -> Result<Report, CliError> {
    let seed = r.settings.seed;
    match r.experiment {
        Experiment::Lln => lln(&r.params()?, seed),
        Experiment::Clt => clt(&r.params()?, seed),
        Experiment::DynVariance => dyn_variance(&r.params()?, seed),
        Experiment::LdpFit => ldp_fit(&r.params()?, seed),
        Experiment::RateSolve => rate_solve(&r.params()?),
        Experiment::RateBounds => rate_bounds(&r.params()?),
        Experiment::Varprob => varprob_report(&r.params()?),
        Experiment::Hydro => hydro_table(&r.params()?),
        Experiment::IdentitySuite => identity_suite(&r.params()?, seed),
        Experiment::Theorem4 => theorem4(&r.params()?, seed),
    }
}

fn parse_profile(s: &str) -> Result<Profile, CliError> {
    Profile::parse(s).map_err(CliError::from)
}

fn curve_kind(s: &str) -> CurveKind {
    if s == "tagged" {
        CurveKind::Tagged
    } else {
        CurveKind::Current
    }
}

/// Formats a float so that CSV bodies are stable across runs.
fn f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.10e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON has no infinities; they become strings.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(f(v))
    }
}

/// Initial configuration for sample `rng` at scale `n`.
fn initial<R: rand::Rng>(p: &Profile, n: f64, w: usize, init: &str, rng: &mut R) -> ssep_core::Result<Configuration> {
    match init {
        "lem" => sample_lem(p, n, w, rng),
        _ => make_dic(p, n, w),
    }
}

struct Endpoint {
    j: i64,
    x: i64,
    flag: bool,
}

fn simulate_endpoints<F>(samples: u64, seed: u64, t_phys: f64, make: F) -> Result<Vec<Endpoint>, CliError>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> ssep_core::Result<Configuration> + Sync + Send,
{
    let opts = SimOptions {
        tagged: true,
        ..SimOptions::at(t_phys)
    };
    let out = par_samples(samples, seed, |_, rng| -> ssep_core::Result<Endpoint> {
        let init = make(rng)?;
        let s = run(&init, &opts, rng)?;
        let c = &s.checkpoints[0];
        Ok(Endpoint {
            j: c.j_origin,
            x: c.x,
            flag: c.boundary_flag,
        })
    });
    out.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

fn endpoint_csv(e: &[Endpoint]) -> String {
    let mut csv = String::from("sample,j,x,boundary_flag\n");
    for (i, v) in e.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{},{}", v.j, v.x, v.flag as u8);
    }
    csv
}

fn summary_json(s: &ssep_core::stats::Summary) -> Value {
    json!({"n": s.n, "mean": num(s.mean), "var": num(s.var), "se": num(s.se), "var_se": num(s.var_se)})
}

pub fn lln(p: &LlnParams, seed: u64) -> Result<Report, CliError> {
    let prof = parse_profile(&p.profile)?;
    let w = p.half_width.unwrap_or_else(|| default_half_width(&prof, p.n, p.t));
    let t_phys = p.n * p.n * p.t;
    let e = simulate_endpoints(p.samples, seed, t_phys, |rng| initial(&prof, p.n, w, &p.init, rng))?;
    let j: Vec<f64> = e.iter().map(|v| v.j as f64 / p.n).collect();
    let x: Vec<f64> = e.iter().map(|v| v.x as f64 / p.n).collect();
    let (sj, sx) = (summarize(&j), summarize(&x));
    let l = hydro::lln(&prof, p.t)?;
    let zj = (sj.mean - l.v_t) / sj.se;
    let zx = (sx.mean - l.u_t) / sx.se;
    let summary = json!({
        "profile": prof.to_string(), "n": p.n, "t": p.t, "physical_time": t_phys, "half_width": w,
        "v_t": l.v_t, "u_t": l.u_t,
        "current": summary_json(&sj), "tagged": summary_json(&sx),
        "z_current": num(zj), "z_tagged": num(zx),
        "within_3se": zj.abs() <= 3.0 && zx.abs() <= 3.0,
        "boundary_flags": e.iter().filter(|v| v.flag).count(),
    });
    Ok(Report::new(endpoint_csv(&e), summary))
}

pub fn clt(p: &CltParams, seed: u64) -> Result<Report, CliError> {
    let prof = Profile::constant(p.rho)?;
    let e = simulate_endpoints(p.samples, seed, p.t, |rng| sample_lem(&prof, 1.0, p.half_width, rng))?;
    let j: Vec<f64> = e.iter().map(|v| v.j as f64).collect();
    let x: Vec<f64> = e.iter().map(|v| v.x as f64).collect();
    let (sj, sx) = (summarize(&j), summarize(&x));
    let targets = varprob::variance_targets(p.rho)?;
    let st = p.t.sqrt();
    let summary = json!({
        "rho": p.rho, "t": p.t, "half_width": p.half_width,
        "var_j_over_sqrt_t": sj.var / st, "var_j_se": sj.var_se / st, "target_j": targets.sigma2_j,
        "ratio_j": sj.var / st / targets.sigma2_j,
        "var_x_over_sqrt_t": sx.var / st, "var_x_se": sx.var_se / st, "target_x": targets.sigma2_x,
        "ratio_x": sx.var / st / targets.sigma2_x,
        "current": summary_json(&sj), "tagged": summary_json(&sx),
        "boundary_flags": e.iter().filter(|v| v.flag).count(),
    });
    Ok(Report::new(endpoint_csv(&e), summary))
}

pub fn dyn_variance(p: &DynVarianceParams, seed: u64) -> Result<Report, CliError> {
    let mut csv = String::from("t,q0,q0_over_sqrt_t,limit\n");
    let mut rows = Vec::new();
    for &t in &p.t_list {
        let d = varprob::dyn_variance_current(t, p.rho)?;
        let _ = writeln!(csv, "{},{},{},{}", f(t), f(d.q0), f(d.q0_over_sqrt_t), f(d.limit));
        rows.push(json!({"t": t, "q0": d.q0, "q0_over_sqrt_t": d.q0_over_sqrt_t, "limit": d.limit,
            "relative_gap": (d.q0_over_sqrt_t - d.limit).abs() / d.limit}));
    }
    let targets = varprob::variance_targets(p.rho)?;
    let mc = if p.samples > 0 {
        let prof = Profile::constant(p.rho)?;
        let start = make_dic(&prof, 1.0, p.half_width)?;
        let e = simulate_endpoints(p.samples, seed, p.t, |_| Ok(start.clone()))?;
        let j: Vec<f64> = e.iter().map(|v| v.j as f64).collect();
        let s = summarize(&j);
        let st = p.t.sqrt();
        json!({
            "t": p.t, "samples": p.samples, "half_width": p.half_width,
            "var_j_over_sqrt_t": s.var / st, "var_j_se": s.var_se / st,
            "target": targets.sigma2_j_dyn, "ratio": s.var / st / targets.sigma2_j_dyn,
            "boundary_flags": e.iter().filter(|v| v.flag).count(),
        })
    } else {
        Value::Null
    };
    let summary = json!({"rho": p.rho, "deterministic": rows, "monte_carlo": mc});
    Ok(Report::new(csv, summary))
}

/// Successes the largest size needs before a slope is fitted.
const MIN_TAIL_HITS: u64 = 20;

pub fn ldp_fit(p: &LdpFitParams, seed: u64) -> Result<Report, CliError> {
    let prof = parse_profile(&p.profile)?;
    let kind = curve_kind(&p.kind);
    let mut csv = String::from("n,samples,successes,p_hat,p_lo,p_hi,log_p,log_p_lo,log_p_hi\n");
    let mut counts = Vec::new();
    // more sampling cannot reveal an impossible event
    let unreachable = out_of_reach(&prof, p.a, kind);
    for (k, &n) in p.n_list.iter().enumerate() {
        let w = default_half_width(&prof, n, p.t) + (p.a.abs() * n).ceil() as usize;
        let (mut hits, mut total, mut block) = (0u64, 0u64, 0u64);
        while total < p.max_samples.max(p.samples) && (block == 0 || (hits < MIN_TAIL_HITS && !unreachable)) {
            // distinct streams per size and block
            let s = seed ^ ((k as u64 + 1) << 40) ^ (block << 48);
            let e = simulate_endpoints(p.samples, s, n * n * p.t, |rng| initial(&prof, n, w, &p.init, rng))?;
            hits += e
                .iter()
                .filter(|v| {
                    let q = if kind == CurveKind::Current { v.j } else { v.x } as f64;
                    q >= p.a * n - 1e-9
                })
                .count() as u64;
            total += p.samples;
            block += 1;
        }
        let (lo, hi) = wilson(hits, total, 1.96);
        let ph = hits as f64 / total as f64;
        let _ = writeln!(
            csv,
            "{},{total},{hits},{},{},{},{},{},{}",
            f(n),
            f(ph),
            f(lo),
            f(hi),
            f(ph.ln()),
            f(lo.ln()),
            f(hi.ln())
        );
        counts.push((n, hits, total));
    }

    // the trial family has no member for some profiles; that is not fatal here
    let upper = match trialbounds::upper_bound(&prof, p.t, p.a, kind) {
        Ok(v) => Some(v),
        Err(ssep_core::Error::NoRoot(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let numeric = if p.grid != "0,0" {
        let (nx, nt) = parse_grid(&p.grid).map_err(CliError::Config)?;
        let init = if p.init == "lem" { InitKind::Lem } else { InitKind::Dic };
        let opts = RateOptions { nx, nt, ..Default::default() };
        let s = match kind {
            CurveKind::Current => ratefn::minimize_rate_current(&prof, p.t, p.a, init, &opts)?,
            CurveKind::Tagged => ratefn::minimize_rate_tagged(&prof, p.t, p.a, init, &opts)?,
        };
        Some(s.value)
    } else {
        None
    };

    let (_, last, _) = *counts.last().expect("n_list is non-empty");
    let counts_json: Vec<Value> =
        counts.iter().map(|(n, k, m)| json!({"n": n, "successes": k, "samples": m})).collect();
    if counts.iter().all(|&(_, k, _)| k == 0) && unreachable {
        let summary = json!({
            "a": p.a, "kind": p.kind, "counts": counts_json, "slope": "-inf",
            "minus_infinity_consistent": true, "upper_bound": upper.map(num), "numeric_rate": numeric,
        });
        return Ok(Report::new(csv, summary));
    }
    if last < MIN_TAIL_HITS {
        return Err(CliError::Numerical(format!(
            "tail undersampled: {last} successes at the largest N (need ≥ {MIN_TAIL_HITS}); (N, successes, samples) {counts:?}"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for &(n, k, m) in &counts {
        if k == 0 {
            continue;
        }
        let ph = k as f64 / m as f64;
        xs.push(n);
        ys.push(ph.ln());
        // inverse delta-method variance of log p̂
        ws.push(m as f64 * ph / (1.0 - ph).max(1e-12));
    }
    if xs.len() < 2 {
        return Err(CliError::Numerical(format!("fewer than two sizes with successes; counts {counts:?}")));
    }
    let (intercept, slope, se) = weighted_line(&xs, &ys, &ws);
    let half = 1.96 * se;
    let width = 2.0 * half;
    let rate = -slope;
    let summary = json!({
        "a": p.a, "kind": p.kind, "init": p.init, "counts": counts_json,
        "intercept": intercept, "slope": slope, "slope_se": se,
        "slope_ci": [slope - half, slope + half], "ci_width": width,
        "rate_estimate": rate, "upper_bound": upper.map(num), "numeric_rate": numeric,
        "below_upper_bound": upper.map(|u| rate <= u + 2.0 * width),
        "matches_numeric": numeric.map(|v| (rate - v).abs() <= 2.0 * width),
    });
    Ok(Report::new(csv, summary))
}

/// True when the profile lacks the mass (or room) to reach deviation `a` at
/// all: current needs `a` particles left of the origin, the tagged particle
/// needs `a` worth of holes on its right.
fn out_of_reach(prof: &Profile, a: f64, kind: CurveKind) -> bool {
    let (prof, a) = if a < 0.0 { (prof.reflected(), -a) } else { (prof.clone(), a) };
    let ext = prof.extent();
    match kind {
        CurveKind::Current => prof.left_tail() == 0.0 && prof.integral(-ext, 0.0) < a - 1e-12,
        CurveKind::Tagged => prof.right_tail() == 1.0 && ext - prof.integral(0.0, ext) < a - 1e-12,
    }
}

pub fn rate_solve(p: &RateSolveParams) -> Result<Report, CliError> {
    let prof = parse_profile(&p.profile)?;
    let (nx, nt) = parse_grid(&p.grid).map_err(CliError::Config)?;
    let init = if p.init == "lem" { InitKind::Lem } else { InitKind::Dic };
    let kind = curve_kind(&p.kind);
    let opts = RateOptions { nx, nt, ..Default::default() };
    let curve = ratefn::rate_curve(&prof, p.t, &p.a_list, kind, init, &opts)?;
    let mut csv = String::from("a,value,kind,feasibility_residual,iterations\n");
    let mut bad = Vec::new();
    for pt in &curve.points {
        let _ = writeln!(csv, "{},{},{},{},{}", f(pt.a), f(pt.value), pt.kind.as_str(), f(pt.residual), pt.iterations);
        if pt.residual > 1e-4 * pt.a.abs().max(1.0) {
            bad.push(pt.a);
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Numerical(format!("constraint not met at a = {bad:?}")));
    }
    let upper = trialbounds::upper_bound_curve(&prof, p.t, &p.a_list, kind)?;
    let pts: Vec<Value> = curve
        .points
        .iter()
        .zip(&upper.points)
        .map(|(n, u)| json!({"a": n.a, "value": n.value, "upper_bound": num(u.value), "residual": n.residual}))
        .collect();
    Ok(Report::new(csv, json!({"profile": prof.to_string(), "t": p.t, "init": p.init, "kind": p.kind, "points": pts})))
}

/// Least-squares slope of `log value` on `log a` over finite positive points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(a, v)| *a > 0.0 && *v > 0.0 && v.is_finite())
        .map(|(a, v)| (a.ln(), v.ln()))
        .unzip();
    (xs.len() >= 2).then(|| ssep_core::stats::slope(&xs, &ys))
}

pub fn rate_bounds(p: &RateBoundsParams) -> Result<Report, CliError> {
    let prof = parse_profile(&p.profile)?;
    let hat = match &p.reference {
        Some(r) => parse_profile(r)?,
        None => prof.clone(),
    };
    let kind = curve_kind(&p.kind);
    let upper = trialbounds::upper_bound_curve(&prof, p.t, &p.a_list, kind)?;
    let mut csv = String::from("a,curve,value,informative\n");
    let mut up = Vec::new();
    for pt in &upper.points {
        let _ = writeln!(csv, "{},upper,{},1", f(pt.a), f(pt.value));
        up.push((pt.a, pt.value));
    }
    let mut lower = Vec::new();
    for &a in &p.a_list {
        match trialbounds::lower_bound_cubic(&prof, p.t, a, p.eps, &hat) {
            Ok(lb) => {
                let _ = writeln!(csv, "{},lower,{},{}", f(a), f(lb.value), lb.informative as u8);
                lower.push(json!({"a": a, "value": num(lb.value), "informative": lb.informative}));
            }
            Err(e) => return Err(CliError::Config(format!("lower bound: {e}"))),
        }
    }
    let mut t4 = Vec::new();
    for &a in &p.a_list {
        if a >= 0.0 {
            let v = trialbounds::theorem4_bound(a, p.t, kind)?;
            let _ = writeln!(csv, "{},theorem4,{},1", f(a), f(v));
            t4.push(json!({"a": a, "value": num(v)}));
        }
    }
    let s = p.t.sqrt();
    let large: Vec<(f64, f64)> = up.iter().copied().filter(|(a, _)| *a >= 10.0 * s && *a <= 40.0 * s).collect();
    let summary = json!({
        "profile": prof.to_string(), "t": p.t, "kind": p.kind, "eps": p.eps,
        "upper": up.iter().map(|(a, v)| json!({"a": a, "value": num(*v)})).collect::<Vec<_>>(),
        "lower": lower, "theorem4_block": t4,
        "upper_loglog_slope_large_a": loglog_slope(&large),
    });
    Ok(Report::new(csv, summary))
}

pub fn varprob_report(p: &VarprobParams) -> Result<Report, CliError> {
    let (nt, nx) = parse_grid(&p.grid).map_err(CliError::Config)?;
    let g = varprob::MinimizerGrid::new(8.0, nt, nx)?;
    let recon = varprob::reconstruct_minimizer(&g);
    let spectral = varprob::spectral_solution(101, 10.0);
    let ik = varprob::integral_K_inverse();
    let inf = varprob::inf_m();
    let pi = std::f64::consts::PI;
    let mut csv = String::from("quantity,t,value,target\n");
    let _ = writeln!(csv, "integral_K_inverse,,{},{}", f(ik), f(4.0 * pi.sqrt()));
    let _ = writeln!(csv, "inf_M,,{},{}", f(inf), f(0.5 * pi.sqrt()));
    let _ = writeln!(csv, "inf_M_spectral,,{},{}", f(spectral.value), f(0.5 * pi.sqrt()));
    let _ = writeln!(csv, "inf_M_grid,,{},{}", f(recon.value), f(0.5 * pi.sqrt()));
    let mut table = Vec::new();
    for &t in &p.t_list {
        let d = match p.half_width {
            Some(r) => varprob::dyn_variance_current_with(t, p.rho, r)?,
            None => varprob::dyn_variance_current(t, p.rho)?,
        };
        let _ = writeln!(csv, "q0_over_sqrt_t,{},{},{}", f(t), f(d.q0_over_sqrt_t), f(d.limit));
        table.push(json!({"t": t, "q0_over_sqrt_t": d.q0_over_sqrt_t, "limit": d.limit}));
    }
    let v = varprob::variance_targets(p.rho)?;
    for (k, val) in [
        ("sigma2_j", v.sigma2_j),
        ("sigma2_x", v.sigma2_x),
        ("sigma2_j_dyn", v.sigma2_j_dyn),
        ("sigma2_x_dyn", v.sigma2_x_dyn),
        ("static_limit", varprob::static_limit(p.rho)),
    ] {
        let _ = writeln!(csv, "{k},,{},", f(val));
    }
    let summary = json!({
        "integral_K_inverse": ik, "inf_M": inf, "inf_M_spectral": spectral.value,
        "inf_M_grid": recon.value, "grid": {"l": 8.0, "nt": nt, "nx": nx},
        "q0_table": table, "variance_targets": v,
    });
    Ok(Report::new(csv, summary))
}

pub fn hydro_table(p: &HydroParams) -> Result<Report, CliError> {
    let prof = parse_profile(&p.profile)?;
    let mut csv = String::from("t,v_t,u_t\n");
    let mut rows = Vec::new();
    for &t in &p.t_list {
        let l = hydro::lln(&prof, t)?;
        let _ = writeln!(csv, "{},{},{}", f(t), f(l.v_t), f(l.u_t));
        rows.push(json!({"t": t, "v_t": l.v_t, "u_t": l.u_t}));
    }
    Ok(Report::new(csv, json!({"profile": prof.to_string(), "rows": rows})))
}

#[derive(Default, Clone, Copy)]
struct IdentityTally {
    samples: u64,
    telescoping: u64,
    tagged_current: u64,
    cutoff: u64,
    order: u64,
    current_bound: u64,
    tagged_occupied: u64,
}

impl IdentityTally {
    fn failures(&self) -> u64 {
        self.telescoping + self.tagged_current + self.cutoff + self.order + self.current_bound + self.tagged_occupied
    }

    fn add(&mut self, o: &Self) {
        self.samples += o.samples;
        self.telescoping += o.telescoping;
        self.tagged_current += o.tagged_current;
        self.cutoff += o.cutoff;
        self.order += o.order;
        self.current_bound += o.current_bound;
        self.tagged_occupied += o.tagged_occupied;
    }
}

fn check_sample(s: &TrajectorySample, n: f64) -> ssep_core::Result<IdentityTally> {
    let mut t = IdentityTally {
        samples: 1,
        ..Default::default()
    };
    t.telescoping += !s.check_telescoping()? as u64;
    let mut rel = true;
    for r in -3..=3 {
        rel &= s.check_tagged_current_relation(r)?;
    }
    t.tagged_current += !rel as u64;
    let mut cut = true;
    for k in 0..s.checkpoints.len() {
        cut &= s.cutoff_decomposition(k, 1.0, n)?.abs() <= 1e-9;
    }
    t.cutoff += !cut as u64;
    t.order += (s.check_order() != Some(true)) as u64;
    t.current_bound += !s.check_current_bounds() as u64;
    t.tagged_occupied += !s.check_tagged_occupied()? as u64;
    Ok(t)
}

pub fn identity_suite(p: &IdentityParams, seed: u64) -> Result<Report, CliError> {
    let per = p.samples.div_ceil(p.profiles.len() as u64);
    let t_phys = p.n * p.n * p.t;
    let mut csv = String::from("profile,samples,telescoping,tagged_current,cutoff,order,current_bound,tagged_occupied\n");
    let mut total = IdentityTally::default();
    let mut rows = Vec::new();
    for (k, spec) in p.profiles.iter().enumerate() {
        let prof = parse_profile(spec)?;
        let w = default_half_width(&prof, p.n, p.t).max(2 * p.n as usize);
        let opts = SimOptions {
            checkpoints: vec![0.25 * t_phys, 0.5 * t_phys, t_phys],
            track_bonds: (-(w as i64)..w as i64).collect(),
            tagged: true,
            labels: true,
            snapshots: true,
            compensator: false,
        };
        let tallies = par_samples(per, seed ^ ((k as u64 + 1) << 40), |i, rng| -> ssep_core::Result<IdentityTally> {
            // alternate deterministic and random (origin forced) starts
            let init = if i % 2 == 0 {
                make_dic(&prof, p.n, w)?
            } else {
                sample_product(&prof, p.n, w, rng, true)?
            };
            check_sample(&run(&init, &opts, rng)?, p.n)
        });
        let mut tally = IdentityTally::default();
        for t in tallies {
            tally.add(&t?);
        }
        let _ = writeln!(
            csv,
            "\"{}\",{},{},{},{},{},{},{}",
            prof,
            tally.samples,
            tally.telescoping,
            tally.tagged_current,
            tally.cutoff,
            tally.order,
            tally.current_bound,
            tally.tagged_occupied
        );
        rows.push(json!({"profile": prof.to_string(), "samples": tally.samples, "failures": tally.failures()}));
        total.add(&tally);
    }
    let failures = total.failures();
    let summary = json!({
        "samples": total.samples, "failures": failures, "all_passed": failures == 0,
        "n": p.n, "t": p.t, "profiles": rows,
    });
    Ok(Report {
        csv,
        summary,
        identity_failure: failures > 0,
    })
}

pub fn theorem4(p: &Theorem4Params, seed: u64) -> Result<Report, CliError> {
    let kind = curve_kind(&p.kind);
    let mut csv = String::from("n,a,samples,successes,log_p_over_n,log_p_lo_over_n,log_p_hi_over_n,bound\n");
    let mut rows = Vec::new();
    let mut exceed = 0u64;
    let mut below = true;
    for (k, &nf) in p.n_list.iter().enumerate() {
        let n = nf as usize;
        let w = p.half_width.unwrap_or_else(|| n + (6.0 * nf * p.t.sqrt()).ceil() as usize + 2);
        let start = block(n, w);
        let e = simulate_endpoints(p.samples, seed ^ ((k as u64 + 1) << 40), nf * nf * p.t, |_| Ok(start.clone()))?;
        // J ≤ N: only the N particles left of the origin can cross it
        exceed += e.iter().filter(|v| v.j > n as i64).count() as u64;
        for &a in &p.a_list {
            let hits = e
                .iter()
                .filter(|v| (if kind == CurveKind::Current { v.j } else { v.x }) as f64 >= a * nf - 1e-9)
                .count() as u64;
            let (lo, hi) = wilson(hits, p.samples, 1.96);
            let ph = hits as f64 / p.samples as f64;
            let bound = trialbounds::theorem4_bound(a, p.t, kind)?;
            let (l, llo, lhi) = (ph.ln() / nf, lo.ln() / nf, hi.ln() / nf);
            below &= llo <= bound;
            let _ = writeln!(csv, "{},{},{},{hits},{},{},{},{}", n, f(a), p.samples, f(l), f(llo), f(lhi), f(bound));
            rows.push(json!({"n": n, "a": a, "successes": hits, "log_p_over_n": num(l),
                "ci": [num(llo), num(lhi)], "bound": num(bound)}));
        }
    }
    // largest C with bound(a) ≤ −C a² on [0.05, 3]
    let mut c_fit = f64::INFINITY;
    for i in 0..=59 {
        let a = 0.05 + (3.0 - 0.05) * i as f64 / 59.0;
        let b = trialbounds::theorem4_bound(a, p.t, kind)?;
        if b.is_finite() {
            c_fit = c_fit.min(-b / (a * a));
        }
    }
    let summary = json!({
        "t": p.t, "kind": p.kind, "rows": rows,
        "current_exceeds_n": exceed, "tail_below_bound": below,
        "quadratic_constant": num(c_fit), "quadratic_constant_positive": c_fit > 0.0,
    });
    if exceed > 0 {
        return Ok(Report {
            csv,
            summary,
            identity_failure: true,
        });
    }
    Ok(Report::new(csv, summary))
}
