//! Closed-form trial densities and the explicit bounds built from them:
//! upper bounds on the current and tagged-particle rate functions, the cubic
//! lower bound, and the exponential-moment bound for the block initial state.
//!
//! The trial field perturbs the heat flow by a bump `λ ε(s/T) ψ(x/L)`:
//! `ψ` is an odd bump on `[−1, 1]` built from `ψ₀(x) = exp(−1/(1−x²))`, `Ψ`
//! its primitive and `ε` a smooth ramp vanishing on `[0, 1/10]`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydro;
use crate::profiles::Profile;
use crate::quad::{gauss_composite, gauss_legendre8, golden_section, norm_cdf_integral, simpson, simpson_pieces};
use crate::ratefn::{DriftFlux, FieldTriple, PointKind, RateCurve, RatePoint, SpaceTimeGrid};

const TABLE_CELLS: usize = 4096;
const RAMP_START: f64 = 0.1;

/// `exp(−1/(1−x²))` on `|x| < 1`, zero once `1 − x² ≤ 1e−12`.
#[inline]
pub fn psi0(x: f64) -> f64 {
    let d = 1.0 - x * x;
    if d <= 1e-12 {
        0.0
    } else {
        (-1.0 / d).exp()
    }
}

#[inline]
pub fn psi0_prime(x: f64) -> f64 {
    let d = 1.0 - x * x;
    if d <= 1e-12 {
        0.0
    } else {
        (-1.0 / d).exp() * (-2.0 * x / (d * d))
    }
}

/// Tabulated `P₀(u) = ∫_{−1}^u ψ₀` and the derived constants.
#[derive(Debug, Clone)]
pub struct Bumps {
    table: Vec<f64>,
    h: f64,
    /// `Z = ∫_{−1}^1 ψ₀`.
    pub z: f64,
    /// `∫ ψ'²`.
    pub int_dpsi_sq: f64,
    /// `∫ Ψ²`.
    pub int_big_psi_sq: f64,
    /// `∫_0^1 ψ`.
    pub int_psi_half: f64,
    /// `1 + sup ε'²`.
    pub eps_star: f64,
}

/// Shared, lazily built bump tables.
pub fn bumps() -> &'static Bumps {
    static CELL: OnceLock<Bumps> = OnceLock::new();
    CELL.get_or_init(Bumps::build)
}

impl Bumps {
    fn build() -> Self {
        let h = 2.0 / TABLE_CELLS as f64;
        let mut table = Vec::with_capacity(TABLE_CELLS + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 0..TABLE_CELLS {
            let a = -1.0 + k as f64 * h;
            acc += gauss_legendre8(psi0, a, a + h);
            table.push(acc);
        }
        let z = acc;
        let mut b = Self {
            table,
            h,
            z,
            int_dpsi_sq: 0.0,
            int_big_psi_sq: 0.0,
            int_psi_half: 0.5 * z,
            eps_star: 0.0,
        };
        b.int_dpsi_sq = gauss_composite(|x| b.psi_prime(x).powi(2), -1.0, 0.0, 512)
            + gauss_composite(|x| b.psi_prime(x).powi(2), 0.0, 1.0, 512);
        b.int_big_psi_sq = gauss_composite(|x| b.big_psi(x).powi(2), -1.0, 0.0, 512)
            + gauss_composite(|x| b.big_psi(x).powi(2), 0.0, 1.0, 512);
        // sup ε' is attained where ψ₀ peaks
        let sup = 2.0 * psi0(0.0) / ((1.0 - RAMP_START) * z);
        b.eps_star = 1.0 + sup * sup;
        b
    }

    /// `P₀(u)` by cubic Hermite interpolation with the exact derivative `ψ₀`.
    pub fn p0(&self, u: f64) -> f64 {
        if u <= -1.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.z;
        }
        let s = (u + 1.0) / self.h;
        let k = (s.floor() as usize).min(TABLE_CELLS - 1);
        let t = s - k as f64;
        let x0 = -1.0 + k as f64 * self.h;
        let (y0, y1) = (self.table[k], self.table[k + 1]);
        let (d0, d1) = (psi0(x0) * self.h, psi0(x0 + self.h) * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
    }

    /// Odd bump: `−ψ₀(2(x+½))` on `x ≤ 0`, `ψ₀(2(x−½))` on `x ≥ 0`.
    pub fn psi(&self, x: f64) -> f64 {
        if x <= 0.0 {
            -psi0(2.0 * x + 1.0)
        } else {
            psi0(2.0 * x - 1.0)
        }
    }

    pub fn psi_prime(&self, x: f64) -> f64 {
        if x <= 0.0 {
            -2.0 * psi0_prime(2.0 * x + 1.0)
        } else {
            2.0 * psi0_prime(2.0 * x - 1.0)
        }
    }

    /// `Ψ(x) = ∫_{−1}^x ψ`; non-positive, vanishing outside `(−1, 1)`.
    pub fn big_psi(&self, x: f64) -> f64 {
        if x <= 0.0 {
            -0.5 * self.p0(2.0 * x + 1.0)
        } else {
            -0.5 * self.z + 0.5 * self.p0(2.0 * x - 1.0)
        }
    }

    /// `∫_x^1 ψ` for `x ∈ [0, 1]`.
    pub fn psi_tail(&self, x: f64) -> f64 {
        -self.big_psi(x.clamp(0.0, 1.0))
    }

    /// Ramp `ε(t)`: zero on `[0, 1/10]`, one at `t = 1`.
    pub fn ramp(&self, t: f64) -> f64 {
        let u = (t - RAMP_START) / (1.0 - RAMP_START);
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            self.p0(2.0 * u - 1.0) / self.z
        }
    }

    pub fn ramp_prime(&self, t: f64) -> f64 {
        let u = (t - RAMP_START) / (1.0 - RAMP_START);
        if !(0.0..=1.0).contains(&u) {
            0.0
        } else {
            2.0 * psi0(2.0 * u - 1.0) / ((1.0 - RAMP_START) * self.z)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bump {
    Psi0,
    Psi,
    BigPsi,
    Ramp,
}

pub fn bump_eval(which: Bump, x: f64) -> f64 {
    let b = bumps();
    match which {
        Bump::Psi0 => psi0(x),
        Bump::Psi => b.psi(x),
        Bump::BigPsi => b.big_psi(x),
        Bump::Ramp => b.ramp(x),
    }
}

/// Amplitude `λ ≥ 0` and signed width `L` of the trial perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub lambda: f64,
    pub l: f64,
}

/// Bounds `(γ_*, γ^*)` of `σ_{T/10} * γ`, which also bound the heat flow at
/// every later time.
pub fn heat_range(p: &Profile, t: f64) -> Result<(f64, f64)> {
    p.heat_bounds(RAMP_START * t)
}

/// Admissible amplitude `½ min(γ_*, 1 − γ^*)`.
pub fn lambda_cap(p: &Profile, t: f64) -> Result<f64> {
    let (lo, hi) = heat_range(p, t)?;
    Ok(0.5 * lo.min(1.0 - hi))
}

fn heat(p: &Profile, s: f64, x: f64) -> f64 {
    if s <= 0.0 {
        p.eval(x)
    } else {
        p.heat_convolve(s, x).expect("s > 0")
    }
}

/// `μ(s, x) = σ_s * γ(x) + λ ε(s/T) ψ(x/L)`.
pub fn trial_density(p: &Profile, t: f64, q: TrialParams, s: f64, x: f64) -> f64 {
    let b = bumps();
    heat(p, s, x) + q.lambda * b.ramp(s / t) * b.psi(x / q.l)
}

/// `H μ(1−μ) = λε/(2L) ψ'(x/L) − λLε'/T Ψ(x/L)`.
fn drift_flux(t: f64, q: TrialParams, s: f64, x: f64) -> f64 {
    let b = bumps();
    let y = x / q.l;
    q.lambda * b.ramp(s / t) / (2.0 * q.l) * b.psi_prime(y) - q.lambda * q.l * b.ramp_prime(s / t) / t * b.big_psi(y)
}

/// Drift `H` of the trial field.
pub fn trial_drift(p: &Profile, t: f64, q: TrialParams, s: f64, x: f64) -> f64 {
    let flux = drift_flux(t, q, s, x);
    if flux == 0.0 {
        return 0.0;
    }
    let m = trial_density(p, t, q, s, x);
    flux / (m * (1.0 - m))
}

/// `J = −½∂_x(σ_s * γ) − λLε'(s/T)/T Ψ(x/L)`.
pub fn trial_current(p: &Profile, t: f64, q: TrialParams, s: f64, x: f64) -> f64 {
    let b = bumps();
    let diff = if s > 0.0 { -0.5 * p.heat_convolve_dx(s, x).expect("s > 0") } else { 0.0 };
    diff - q.lambda * q.l * b.ramp_prime(s / t) / t * b.big_psi(x / q.l)
}

/// Trial fields sampled on the grid: densities at nodes, drift and current
/// at faces and step midpoints.
pub fn trial_field(p: &Profile, q: TrialParams, g: &SpaceTimeGrid) -> Result<FieldTriple> {
    let t = g.t;
    let cap = lambda_cap(p, t)?;
    if !(q.lambda >= 0.0 && q.lambda <= cap * (1.0 + 1e-12)) || q.l == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "λ = {} outside [0, {cap}] or L = 0",
            q.lambda
        )));
    }
    let mu = (0..=g.nt)
        .map(|n| (0..g.nx).map(|i| trial_density(p, t, q, g.time(n), g.x(i))).collect())
        .collect();
    let h = (0..g.nt)
        .map(|n| (0..g.faces()).map(|f| trial_drift(p, t, q, g.time_mid(n), g.face_x(f))).collect())
        .collect();
    let j = (0..g.nt)
        .map(|n| (0..g.faces()).map(|f| trial_current(p, t, q, g.time_mid(n), g.face_x(f))).collect())
        .collect();
    Ok(FieldTriple { grid: *g, mu, h, j, flux: DriftFlux::Centred })
}

/// `4ε*/(γ_*(1−γ^*)) [λ²T/(4|L|) ∫ψ'² + λ²|L|³/T ∫Ψ²]`.
pub fn i0_bound(p: &Profile, t: f64, q: TrialParams) -> Result<f64> {
    let (lo, hi) = heat_range(p, t)?;
    let b = bumps();
    let l = q.l.abs();
    let lam2 = q.lambda * q.lambda;
    Ok(4.0 * b.eps_star / (lo * (1.0 - hi))
        * (lam2 * t / (4.0 * l) * b.int_dpsi_sq + lam2 * l.powi(3) / t * b.int_big_psi_sq))
}

/// `(λ, L)` with `λ L ∫_0^1 ψ = a − v_T`, `L = ±κ√T`,
/// `κ = max(1, κ₀|a − v_T|/√T)`.
pub fn solve_constraint_current(p: &Profile, t: f64, a: f64) -> Result<TrialParams> {
    let v = hydro::lln_current(p, t)?;
    solve_current_given(p, t, a - v)
}

fn solve_current_given(p: &Profile, t: f64, c: f64) -> Result<TrialParams> {
    if c == 0.0 {
        return Ok(TrialParams { lambda: 0.0, l: t.sqrt() });
    }
    let b = bumps();
    let cap = lambda_cap(p, t)?;
    if !(cap > 0.0) {
        return Err(Error::NoRoot(format!("profile {p} leaves no admissible amplitude")));
    }
    let kappa0 = 1.0 / (cap * b.int_psi_half);
    let kappa = (kappa0 * c.abs() / t.sqrt()).max(1.0);
    let l = c.signum() * kappa * t.sqrt();
    Ok(TrialParams {
        lambda: c / (l * b.int_psi_half),
        l,
    })
}

/// `(λ, L)` with `λ L ∫_{|a|/|L|}^1 ψ = ∫_{u_T}^a σ_T * γ`; `L` starts at
/// `max(κ√T, 2|a|)` and grows until `λ` is admissible.
pub fn solve_constraint_tagged(p: &Profile, t: f64, a: f64) -> Result<TrialParams> {
    let u = hydro::lln_tagged(p, t)?;
    let rhs = tagged_target(p, t, u, a);
    if rhs == 0.0 {
        return Ok(TrialParams { lambda: 0.0, l: t.sqrt() });
    }
    let b = bumps();
    let cap = lambda_cap(p, t)?;
    let kappa0 = 1.0 / (cap * b.int_psi_half);
    let kappa = (kappa0 * rhs.abs() / t.sqrt()).max(1.0);
    let mut width = (kappa * t.sqrt()).max(2.0 * a.abs());
    for _ in 0..400 {
        let l = rhs.signum() * width;
        let lambda = rhs / (l * b.psi_tail(a.abs() / width));
        if lambda <= cap {
            return Ok(TrialParams { lambda, l });
        }
        width *= 1.1;
    }
    Err(Error::NoRoot(format!("no admissible (λ, L) for the tagged target {a}")))
}

fn tagged_target(p: &Profile, t: f64, u: f64, a: f64) -> f64 {
    let f = |x: f64| p.heat_convolve(t, x).expect("t > 0");
    if a >= u {
        simpson(f, u, a, 1e-13)
    } else {
        -simpson(f, a, u, 1e-13)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    Current,
    Tagged,
}

/// The bound (I₀ bound) at the constraint-solving `(λ, L)`.
pub fn upper_bound(p: &Profile, t: f64, a: f64, kind: CurveKind) -> Result<f64> {
    let q = match kind {
        CurveKind::Current => solve_constraint_current(p, t, a)?,
        CurveKind::Tagged => solve_constraint_tagged(p, t, a)?,
    };
    i0_bound(p, t, q)
}

/// Upper bounds at every `a`, kind-tagged for output.
pub fn upper_bound_curve(p: &Profile, t: f64, a_list: &[f64], kind: CurveKind) -> Result<RateCurve> {
    let mut points = Vec::with_capacity(a_list.len());
    for &a in a_list {
        points.push(RatePoint {
            a,
            value: upper_bound(p, t, a, kind)?,
            kind: PointKind::UpperBound,
            residual: 0.0,
            iterations: 0,
        });
    }
    Ok(RateCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    /// False when the bound is not positive, i.e. says nothing.
    pub informative: bool,
}

/// `(a−ε)³/(3T) − ½h(γ;γ̂) − T∫γ̂'²/(γ̂²(1−γ̂)²) − (3/2)ε` for `a > 0`,
/// mirrored through `x ↦ −x` for `a < 0`.
pub fn lower_bound_cubic(p: &Profile, t: f64, a: f64, eps: f64, hat: &Profile) -> Result<LowerBound> {
    if a < 0.0 {
        return lower_bound_cubic(&p.reflected(), t, -a, eps, &hat.reflected());
    }
    if !hat.is_continuous() || !(hat.min_value() > 0.0 && hat.max_value() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "reference profile {hat} must be continuous and strictly inside (0, 1)"
        )));
    }
    let entropy = profile_entropy(p, hat);
    let mut breaks = hat.breakpoints();
    breaks.dedup();
    let fisher = if breaks.len() < 2 {
        0.0
    } else {
        simpson_pieces(
            |x| {
                let g = hat.eval(x);
                let d = hat.derivative(x);
                d * d / (g * g * (1.0 - g) * (1.0 - g))
            },
            &breaks,
            1e-12,
        )
    };
    let value = (a - eps).powi(3) / (3.0 * t) - 0.5 * entropy - t * fisher - 1.5 * eps;
    Ok(LowerBound {
        value,
        informative: value > 0.0,
    })
}

/// `∫ h_d(γ(x); γ̂(x)) dx`, infinite when the tails differ.
pub fn profile_entropy(p: &Profile, hat: &Profile) -> f64 {
    use crate::ratefn::h_d;
    if h_d(p.left_tail(), hat.left_tail()) > 0.0 || h_d(p.right_tail(), hat.right_tail()) > 0.0 {
        return f64::INFINITY;
    }
    let mut breaks = p.breakpoints();
    breaks.extend(hat.breakpoints());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.len() < 2 {
        return 0.0;
    }
    simpson_pieces(|x| h_d(p.eval(x), hat.eval(x)), &breaks, 1e-12)
}

/// Exponential-moment bound on `(1/N) log P(· ≥ aN)` for the block initial
/// state `1_{[−1,1]}` at macroscopic time `t`.
///
/// Tagged particle, `0 ≤ a ≤ 1`: the minimum over `λ ∈ [0, 10]` of
/// `−λa + (e^{2λ}−1)/2 ∫_{−1}^a P(N_t > a−x)dx + (e^{−2λ}−1)/2 ∫_a^1 P(N_t ≤ a−x)dx`.
/// Tagged, `a ≥ 1`: `log S + 1 − S` with `S = ∫_{−1}^1 P(N_t > a−x)dx`.
/// Current: `−∞` for `a > 1`, otherwise the minimum over `λ` of
/// `−λa + S₀(cosh 2λ − 1)` with `S₀ = ∫_0^1 P(N_t > y)dy`.
pub fn theorem4_bound(a: f64, t: f64, kind: CurveKind) -> Result<f64> {
    if !(a >= 0.0 && t > 0.0) {
        return Err(Error::InvalidArgument(format!("need a ≥ 0 and t > 0, got a={a} t={t}")));
    }
    let s = t.sqrt();
    // ∫_lo^hi Φ(u) du in closed form
    let phi_int = |lo: f64, hi: f64| norm_cdf_integral(hi) - norm_cdf_integral(lo);
    match kind {
        CurveKind::Tagged if a <= 1.0 => {
            let big_a = s * phi_int((-1.0 - a) / s, 0.0);
            let big_b = s * phi_int((a - 1.0) / s, 0.0);
            let f = |l: f64| -l * a + 0.5 * (2.0 * l).exp_m1() * big_a + 0.5 * (-2.0 * l).exp_m1() * big_b;
            Ok(golden_section(f, 0.0, 10.0, 1e-10).1.min(0.0))
        }
        CurveKind::Tagged => {
            let big_s = s * phi_int((-1.0 - a) / s, (1.0 - a) / s);
            Ok(big_s.ln() + 1.0 - big_s)
        }
        CurveKind::Current if a > 1.0 => Ok(f64::NEG_INFINITY),
        CurveKind::Current => {
            let s0 = s * phi_int(-1.0 / s, 0.0);
            let f = |l: f64| -l * a + s0 * ((2.0 * l).cosh() - 1.0);
            Ok(golden_section(f, 0.0, 10.0, 1e-10).1.min(0.0))
        }
    }
}
