//! Constrained minimisation of the rate functional: augmented Lagrangian
//! outer loop around L-BFGS on the drift, started from the trial field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adjoint::{logit, Constraint, Penalty, Problem};
use super::grid::{advance, zero_drift, DriftFlux, FieldTriple, Implicit, SpaceTimeGrid};
use super::lbfgs::{minimize, LbfgsOptions};
use super::{PointKind, RateCurve, RatePoint};
use crate::error::{Error, Result};
use crate::hydro;
use crate::profiles::Profile;
use crate::trialbounds::{self, CurveKind, TrialParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Dic,
    Lem,
}

impl std::str::FromStr for InitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dic" => Ok(Self::Dic),
            "lem" => Ok(Self::Lem),
            _ => Err(Error::InvalidArgument(format!("init must be dic or lem, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub nx: usize,
    pub nt: usize,
    /// Overrides the automatic grid when set.
    pub grid: Option<SpaceTimeGrid>,
    pub max_outer: usize,
    pub max_inner: usize,
    pub inner_ftol: f64,
    /// Relative change of the value between outer iterations that counts
    /// as converged.
    pub value_tol: f64,
    /// Drift flux; chosen from the expected cell Péclet number when unset.
    pub flux: Option<DriftFlux>,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            nx: 201,
            nt: 300,
            grid: None,
            max_outer: 20,
            max_inner: 400,
            inner_ftol: 1e-7,
            value_tol: 1e-3,
            flux: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSolution {
    pub a: f64,
    pub value: f64,
    pub i0: f64,
    pub entropy: f64,
    /// `|constraint|` at the returned point.
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub outer: usize,
    pub converged: bool,
    pub flux: DriftFlux,
    pub trial: TrialParams,
    pub upper_bound: f64,
    #[serde(skip)]
    pub field: Option<FieldTriple>,
}

/// Domain `L = 2.5|a| + max(|x*|, |x^*|) + 6√T`, at least `n_t` steps and
/// never fewer than `Δt ≤ Δx²` allows.
pub fn default_grid(p: &Profile, t: f64, a: f64, nx: usize, nt: usize) -> Result<SpaceTimeGrid> {
    let l = 2.5 * a.abs() + p.extent() + 6.0 * t.sqrt();
    let probe = SpaceTimeGrid { l, nx, t, nt };
    SpaceTimeGrid::new(l, nx, t, nt.max(probe.min_nt()))
}

/// Upwind once moving the deviation `dev` across the origin within `T`
/// needs drifts of order `4|dev|/T` whose cell Péclet number `2|h|Δx`
/// exceeds 2; centred otherwise.
pub fn auto_flux(g: &SpaceTimeGrid, dev: f64) -> DriftFlux {
    let peclet = 8.0 * dev.abs() / g.t * g.dx();
    if peclet > 2.0 {
        DriftFlux::Upwind
    } else {
        DriftFlux::Centred
    }
}

fn initial_drift(p: &Profile, t: f64, q: TrialParams, g: &SpaceTimeGrid) -> Result<Vec<Vec<f64>>> {
    if q.lambda == 0.0 {
        return Ok(zero_drift(g));
    }
    let mut q = q;
    let room = 0.9 * g.l;
    if q.l.abs() > room {
        q.l = q.l.signum() * room;
    }
    q.lambda = q.lambda.min(trialbounds::lambda_cap(p, t)?);
    Ok((0..g.nt)
        .map(|n| {
            (0..g.faces())
                .map(|f| trialbounds::trial_drift(p, t, q, g.time_mid(n), g.face_x(f)))
                .collect()
        })
        .collect())
}

/// Fraction of the available room `γ` (deficit side) or `1 − γ` (excess
/// side) used by the transport start.
const TRANSPORT_FILL: f64 = 0.9;

/// Node values of the end-time displacement `ψ` of the transport start:
/// an excess of `|dev|` on one side of the origin and an equal deficit on
/// the other, each a smoothed plateau filling [`TRANSPORT_FILL`] of the room
/// left by `γ`.
fn transport_shape(gamma: &[f64], g: &SpaceTimeGrid, dev: f64) -> Vec<f64> {
    let dx = g.dx();
    let delta = (2.0 * dx).max(0.5);
    let sgn = dev.signum();
    let room = |i: usize, right: bool| {
        // the side receiving mass fills holes, the other empties particles
        if (right && sgn > 0.0) || (!right && sgn < 0.0) {
            1.0 - gamma[i]
        } else {
            gamma[i]
        }
    };
    let side = |right: bool, w: f64| -> Vec<f64> {
        (0..g.nx)
            .map(|i| {
                let x = g.x(i);
                let r = if right { x } else { -x };
                if r <= 0.0 {
                    return 0.0;
                }
                TRANSPORT_FILL * room(i, right) * (r / delta).tanh() * 0.5 * (1.0 - ((r - w) / delta).tanh())
            })
            .collect()
    };
    let mass = |v: &[f64]| v.iter().sum::<f64>() * dx;
    let mut psi = vec![0.0; g.nx];
    for right in [true, false] {
        // widest plateau that still leaves a margin at the edge
        let (mut lo, mut hi) = (0.0, (g.l - 4.0 * delta).max(0.0));
        let target = dev.abs();
        if mass(&side(right, hi)) > target {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mass(&side(right, mid)) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let v = side(right, hi);
        let scale = target / mass(&v).max(1e-300);
        // a plateau that cannot hold `dev` is stretched in height, capped
        // below the room actually available
        let scale = scale.min(1.0 / TRANSPORT_FILL * 0.99);
        let sign = if right { sgn } else { -sgn };
        for (p, x) in psi.iter_mut().zip(v) {
            *p += sign * scale * x;
        }
    }
    psi
}

/// Drift that steers the scheme along `γ + (t/T)ψ`: each step's drift flux
/// is read off the discrete continuity equation for the wanted increment,
/// then divided by the face mobility. Feedback through the actual density
/// keeps the path on track.
fn transport_drift(
    gamma: &[f64],
    psi: &[f64],
    g: &SpaceTimeGrid,
    flux: DriftFlux,
) -> Result<Vec<Vec<f64>>> {
    let imp = Implicit::new(g);
    let (nx, nt) = (g.nx, g.nt);
    let (dx, dt) = (g.dx(), g.dt());
    let alpha = imp.alpha();
    let mut cur = gamma.to_vec();
    let mut rows = Vec::with_capacity(nt);
    for n in 0..nt {
        let frac = (n + 1) as f64 / nt as f64;
        let mut d = vec![0.0; nx - 1];
        for i in 1..nx - 1 {
            let want = gamma[i] + frac * psi[i] - cur[i];
            let diff = 2.0 * alpha * (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]);
            d[i] = d[i - 1] - dx / dt * (want - diff);
        }
        let row: Vec<f64> = (0..nx - 1)
            .map(|f| {
                let m = flux.mobility(d[f], &cur, f);
                if m > 1e-9 {
                    d[f] / m
                } else {
                    0.0
                }
            })
            .collect();
        let (next, _) = advance(&cur, &row, g, &imp, flux, n)?;
        rows.push(row);
        cur = next;
    }
    Ok(rows)
}

/// Drift bound for the upwind flux: outflow from a node over one step
/// stays below what the explicit half of the diffusion leaves in it.
fn drift_cap(g: &SpaceTimeGrid) -> f64 {
    let alpha = g.dt() / (4.0 * g.dx() * g.dx());
    0.45 * (1.0 - 2.0 * alpha) * g.dx() / g.dt()
}

/// Largest `Δt|h|/Δx` over a drift field.
fn courant(h: &[Vec<f64>], g: &SpaceTimeGrid) -> f64 {
    let m = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    m * g.dt() / g.dx()
}

struct Outcome {
    x: Vec<f64>,
    value: f64,
    i0: f64,
    entropy: f64,
    residual: f64,
    iterations: usize,
    outer: usize,
    converged: bool,
    field: FieldTriple,
}

/// Augmented Lagrangian around L-BFGS. `scale` is a rough value of the
/// optimum and `dev` the size of the constraint violation at zero drift;
/// together they set the initial penalty.
fn augmented_lagrangian(problem: &Problem, x0: Vec<f64>, tol: f64, scale: f64, dev: f64, opts: &RateOptions) -> Result<Outcome> {
    let dev = dev.abs().max(1e-3);
    let scale = scale.max(1e-8);
    let mut pen = Penalty {
        nu: 0.0,
        beta: 10.0 * scale / (dev * dev),
    };
    let inner = LbfgsOptions {
        max_iter: opts.max_inner,
        ftol: opts.inner_ftol,
        fscale: scale * 1e-3,
        ..Default::default()
    };
    let mut x = x0;
    let mut iterations = 0;
    let mut prev_c = f64::INFINITY;
    let mut prev_value = f64::NAN;
    let mut best: Option<Outcome> = None;
    for outer in 1..=opts.max_outer {
        let r = minimize(
            |v| problem.value_grad(v, pen).map(|(f, g, _)| (f, g)),
            x.clone(),
            &inner,
        )
        .ok_or_else(|| Error::Unstable {
            step: 0,
            value: f64::NAN,
            advice: "the starting drift is not admissible on this grid".into(),
        })?;
        iterations += r.iterations;
        x = r.x;
        let e = problem.evaluate(&x)?;
        let c = e.constraint;
        let value = e.rate();
        let feasible = c.abs() <= tol;
        let settled = (value - prev_value).abs() <= opts.value_tol * value.abs().max(scale * 1e-2);
        let out = Outcome {
            x: x.clone(),
            value,
            i0: e.i0,
            entropy: e.entropy,
            residual: c.abs(),
            iterations,
            outer,
            converged: feasible && settled,
            field: e.field,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                let bf = b.residual <= tol;
                (feasible && (!bf || value < b.value)) || (!feasible && !bf && c.abs() < b.residual)
            }
        };
        if out.converged {
            return Ok(out);
        }
        if better {
            best = Some(out);
        }
        pen.nu += pen.beta * c;
        if c.abs() > 0.25 * prev_c.abs() {
            pen.beta *= 4.0;
        }
        prev_c = c;
        prev_value = value;
    }
    best.ok_or_else(|| Error::NoRoot("no outer iteration completed".into()))
}

fn solve(
    p: &Profile,
    t: f64,
    a: f64,
    kind: CurveKind,
    init: InitKind,
    opts: &RateOptions,
) -> Result<RateSolution> {
    let mut g = match opts.grid {
        Some(g) => g,
        None => default_grid(p, t, a, opts.nx, opts.nt)?,
    };
    if a.abs() > g.l {
        return Err(Error::InvalidArgument(format!("target {a} lies outside the domain [−{0}, {0}]", g.l)));
    }
    let (trial, dev) = match kind {
        CurveKind::Current => {
            let v = hydro::lln_current(p, t)?;
            (trialbounds::solve_constraint_current(p, t, a)?, a - v)
        }
        CurveKind::Tagged => {
            let u = hydro::lln_tagged(p, t)?;
            (trialbounds::solve_constraint_tagged(p, t, a)?, p.integral(u, a).abs())
        }
    };
    let upper = trialbounds::i0_bound(p, t, trial)?;
    let constraint = match kind {
        CurveKind::Current => Constraint::Current { a },
        CurveKind::Tagged => Constraint::Tagged { a, weights: g.interval_weights(0.0, a) },
    };
    let tol = 1e-4 * a.abs().max(1.0);
    let flux = opts.flux.unwrap_or_else(|| auto_flux(&g, dev));
    let h0 = if flux == DriftFlux::Upwind && kind == CurveKind::Current {
        // the trial field needs a width of order 18|a| to carry a large
        // deviation; steer the mass across directly instead, with enough
        // steps to keep the explicit drift well inside its stability limit
        let mut attempt = None;
        for _ in 0..6 {
            let gamma = g.sample(p);
            let psi = transport_shape(&gamma, &g, dev);
            match transport_drift(&gamma, &psi, &g, flux) {
                Ok(h) if courant(&h, &g) <= 0.25 => {
                    attempt = Some(h);
                    break;
                }
                _ if opts.grid.is_none() => g = SpaceTimeGrid::new(g.l, g.nx, g.t, 2 * g.nt)?,
                _ => break,
            }
        }
        match attempt {
            Some(h) => h,
            None => initial_drift(p, t, trial, &g)?,
        }
    } else {
        initial_drift(p, t, trial, &g)?
    };
    let gamma = g.sample(p);

    let offset = g.origin_correction(p);
    let mut dic = Problem::new(g, gamma.clone(), false, constraint.clone())
        .with_origin_offset(offset)
        .with_flux(flux);
    let cap = drift_cap(&g);
    if flux == DriftFlux::Upwind {
        dic = dic.with_drift_cap(cap);
    }
    let x0 = dic.pack(&h0, None);
    // the trial bound overestimates badly for large targets, where the
    // optimum grows like dev³/3T rather than dev²/√T
    let estimate = 2.0 * dev * dev / t.sqrt() + dev.abs().powi(3) / (3.0 * t);
    let mut scale = (0.2 * upper).min(estimate);
    if let Ok(e) = dic.evaluate(&x0) {
        // a start that nearly meets the target prices the optimum better
        if e.constraint.abs() <= 0.1 * dev.abs() {
            scale = scale.max(0.5 * e.rate());
        }
    }
    let mut out = augmented_lagrangian(&dic, x0, tol, scale, dev, opts)?;

    if init == InitKind::Lem {
        let mut lem = Problem::new(g, gamma.clone(), true, constraint)
            .with_origin_offset(offset)
            .with_flux(flux);
        if flux == DriftFlux::Upwind {
            lem = lem.with_drift_cap(cap);
        }
        let (h, _) = dic.unpack(&out.x);
        let mut x = lem.pack(&h, None);
        let off = x.len() - (g.nx - 2);
        for (i, v) in x[off..].iter_mut().enumerate() {
            *v = logit(gamma[i + 1]);
        }
        let dic_out = out;
        out = augmented_lagrangian(&lem, x, tol, dic_out.value.max(scale * 1e-2), dev, opts)?;
        out.iterations += dic_out.iterations;
    }

    Ok(RateSolution {
        a,
        value: out.value,
        i0: out.i0,
        entropy: out.entropy,
        residual: out.residual,
        tolerance: tol,
        iterations: out.iterations,
        outer: out.outer,
        converged: out.converged,
        flux,
        trial,
        upper_bound: upper,
        field: Some(out.field),
    })
}

/// Numerical `𝕁(a) = inf{I(μ) : ∫_0^T J(0, t) dt = a}`.
pub fn minimize_rate_current(p: &Profile, t: f64, a: f64, init: InitKind, opts: &RateOptions) -> Result<RateSolution> {
    solve(p, t, a, CurveKind::Current, init, opts)
}

/// Numerical `𝕀(a) = inf{I(μ) : ∫_0^T J(0, t) dt = ∫_0^a μ_T}`.
pub fn minimize_rate_tagged(p: &Profile, t: f64, a: f64, init: InitKind, opts: &RateOptions) -> Result<RateSolution> {
    solve(p, t, a, CurveKind::Tagged, init, opts)
}

/// Numerical minima for several targets, solved in parallel.
pub fn rate_curve(
    p: &Profile,
    t: f64,
    a_list: &[f64],
    kind: CurveKind,
    init: InitKind,
    opts: &RateOptions,
) -> Result<RateCurve> {
    let sols: Vec<Result<RateSolution>> = a_list
        .par_iter()
        .map(|&a| solve(p, t, a, kind, init, opts))
        .collect();
    let mut points = Vec::with_capacity(a_list.len());
    for s in sols {
        let s = s?;
        points.push(RatePoint {
            a: s.a,
            value: s.value,
            kind: PointKind::NumericMin,
            residual: s.residual,
            iterations: s.iterations,
        });
    }
    Ok(RateCurve { points })
}
