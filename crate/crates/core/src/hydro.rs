//! Hydrodynamic speeds: the current `v_T` through the origin and the
//! position `u_T` of the particle started there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::Profile;
use crate::quad::{bisect, norm_pdf, norm_sf, simpson_pieces};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnResult {
    pub t: f64,
    pub v_t: f64,
    pub u_t: f64,
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// Breakpoints of `p` inside `(lo, hi)` plus the endpoints.
fn splits(p: &Profile, lo: f64, hi: f64) -> Vec<f64> {
    let mut v = vec![lo];
    v.extend(p.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
    v.push(hi);
    v
}

/// `∫_c^∞ P(Z > u) du = φ(c) − c·P(Z > c)`.
fn gauss_tail_integral(c: f64) -> f64 {
    norm_pdf(c) - c * norm_sf(c)
}

/// `v_T = ∫_0^∞ [σ_T * γ − γ](x) dx`.
///
/// Beyond `x^* + c√T` the integrand is bounded by `P(|Z| > (x − x^*)/√T)`,
/// so the cut-off `c` is chosen from that bound rather than guessed.
pub fn lln_current(p: &Profile, t: f64) -> Result<f64> {
    check_time(t)?;
    let s = t.sqrt();
    let (_, x_hi) = p.tail_points();
    let mut c = 6.0;
    while 2.0 * s * gauss_tail_integral(c) > 1e-13 {
        c += 1.0;
    }
    let upper = x_hi.max(0.0) + c * s;
    let f = |x: f64| p.heat_convolve(t, x).expect("t > 0") - p.eval(x);
    Ok(simpson_pieces(f, &splits(p, 0.0, upper), 1e-12))
}

/// `∫_0^α σ_T * γ` (signed).
fn mass_from_origin(p: &Profile, t: f64, alpha: f64) -> f64 {
    let f = |x: f64| p.heat_convolve(t, x).expect("t > 0");
    if alpha >= 0.0 {
        simpson_pieces(f, &[0.0, alpha], 1e-13)
    } else {
        -simpson_pieces(f, &[alpha, 0.0], 1e-13)
    }
}

/// `u_T`: the root of `∫_0^α σ_T * γ = v_T`.
pub fn lln_tagged(p: &Profile, t: f64) -> Result<f64> {
    let v = lln_current(p, t)?;
    lln_tagged_given(p, t, v)
}

fn lln_tagged_given(p: &Profile, t: f64, v: f64) -> Result<f64> {
    check_time(t)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    let (x_lo, x_hi) = p.tail_points();
    let f = |a: f64| mass_from_origin(p, t, a) - v;
    let mut lo = -(x_lo.abs() + 10.0 * t.sqrt());
    let mut hi = x_hi.abs() + 10.0 * t.sqrt();
    let mut tries = 0;
    while f(lo) > 0.0 || f(hi) < 0.0 {
        lo *= 2.0;
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::NoRoot(format!("no bracket for the tagged speed of {p}")));
        }
    }
    Ok(bisect(f, lo, hi, 1e-12))
}

pub fn lln(p: &Profile, t: f64) -> Result<LlnResult> {
    let v_t = lln_current(p, t)?;
    let u_t = lln_tagged_given(p, t, v_t)?;
    Ok(LlnResult { t, v_t, u_t })
}
