//! Functionals of discrete fields: the dynamical cost `I₀`, relative
//! entropy, integrated currents and the energy identity.

use super::grid::{FieldTriple, SpaceTimeGrid};
use crate::profiles::Profile;

/// Density clamp used inside logarithms and quotients.
pub const DELTA: f64 = 1e-6;

#[inline]
fn clamp(v: f64) -> f64 {
    v.clamp(DELTA, 1.0 - DELTA)
}

/// `I₀ = ½ Σ_n Σ_f h² M̄ Δx Δt`, with `M̄` the face mobility averaged over
/// the two ends of the step.
pub fn i0_evaluate(f: &FieldTriple) -> f64 {
    let g = &f.grid;
    let mut acc = 0.0;
    for n in 0..g.nt {
        for (k, &h) in f.h[n].iter().enumerate() {
            if h != 0.0 {
                acc += h * h * f.mean_mobility(n, k);
            }
        }
    }
    0.5 * acc * g.dx() * g.dt()
}

/// Bernoulli relative entropy `h_d(α; β)` with `0 log 0 = 0`; `+∞` when
/// `β ∈ {0, 1}` and `α` puts mass where `β` has none.
pub fn h_d(alpha: f64, beta: f64) -> f64 {
    let term = |p: f64, q: f64| {
        if p <= 0.0 {
            0.0
        } else if q <= 0.0 {
            f64::INFINITY
        } else {
            p * (p / q).ln()
        }
    };
    term(alpha, beta) + term(1.0 - alpha, 1.0 - beta)
}

/// `∂_α h_d(α; β)` with both arguments clamped.
pub(crate) fn h_d_prime(alpha: f64, beta: f64) -> f64 {
    let (a, b) = (clamp(alpha), clamp(beta));
    (a / b).ln() - ((1.0 - a) / (1.0 - b)).ln()
}

/// Trapezoid `∫ h_d(μ₀(x); γ(x)) dx` over the grid nodes.
pub fn relative_entropy(mu0: &[f64], p: &Profile, g: &SpaceTimeGrid) -> f64 {
    let gamma = g.sample(p);
    relative_entropy_nodes(mu0, &gamma, g.dx())
}

pub(crate) fn relative_entropy_nodes(mu0: &[f64], gamma: &[f64], dx: f64) -> f64 {
    let n = mu0.len();
    mu0.iter()
        .zip(gamma)
        .enumerate()
        .map(|(i, (&a, &b))| {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            w * h_d(a, b)
        })
        .sum::<f64>()
        * dx
}

/// `∫_0^T J(x, t) dt`, interpolated linearly between face midpoints and held
/// constant beyond the outermost faces.
pub fn integrated_current(f: &FieldTriple, x: f64) -> f64 {
    let g = &f.grid;
    let s = (x + g.l) / g.dx() - 0.5;
    let last = g.faces() - 1;
    if s <= 0.0 {
        return f.face_current(0);
    }
    if s >= last as f64 {
        return f.face_current(last);
    }
    let k = s.floor() as usize;
    let w = s - k as f64;
    (1.0 - w) * f.face_current(k) + w * f.face_current(k + 1)
}

/// Trapezoid `∫_0^L [μ_T − μ_0] dx` on the nodes.
pub fn mass_displacement(f: &FieldTriple) -> f64 {
    let g = &f.grid;
    let c = g.center();
    let (first, last) = (&f.mu[0], &f.mu[g.nt]);
    let mut acc = 0.5 * (last[c] - first[c]);
    for i in c + 1..g.nx - 1 {
        acc += last[i] - first[i];
    }
    acc += 0.5 * (last[g.nx - 1] - first[g.nx - 1]);
    acc * g.dx()
}

/// Terms of the energy identity
/// `I₀ = ⅛∫∫(∂_xμ)²/m + ½[h(μ_T;γ̂) − h(μ_0;γ̂)] + ½∫∂_x logit γ̂ ∫J dt dx + ½∫∫J²/m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    pub i0: f64,
    pub gradient: f64,
    pub entropy: f64,
    pub flux: f64,
    pub current: f64,
}

impl EnergyTerms {
    pub fn residual(&self) -> f64 {
        (self.i0 - (self.gradient + self.entropy + self.flux + self.current)).abs()
    }
}

pub fn energy_terms(f: &FieldTriple, reference: &Profile) -> EnergyTerms {
    let g = &f.grid;
    let (dx, dt) = (g.dx(), g.dt());
    let mut gradient = 0.0;
    let mut current = 0.0;
    for n in 0..g.nt {
        let (a, b) = (&f.mu[n], &f.mu[n + 1]);
        for k in 0..g.faces() {
            let m = f.mean_mobility(n, k).max(DELTA * (1.0 - DELTA));
            let grad = 0.5 * ((a[k + 1] + b[k + 1]) - (a[k] + b[k])) / dx;
            gradient += grad * grad / m;
            current += f.j[n][k] * f.j[n][k] / m;
        }
    }
    gradient *= 0.125 * dx * dt;
    current *= 0.5 * dx * dt;

    let gamma = g.sample(reference);
    let entropy = 0.5
        * (relative_entropy_nodes(&f.mu[g.nt], &gamma, dx) - relative_entropy_nodes(&f.mu[0], &gamma, dx));

    let logit = |v: f64| {
        let v = clamp(v);
        (v / (1.0 - v)).ln()
    };
    let mut flux = 0.0;
    for k in 0..g.faces() {
        let d = (logit(gamma[k + 1]) - logit(gamma[k])) / dx;
        flux += d * f.face_current(k);
    }
    flux *= 0.5 * dx;

    EnergyTerms {
        i0: i0_evaluate(f),
        gradient,
        entropy,
        flux,
        current,
    }
}

/// `|I₀ − (energy decomposition)|`.
pub fn energy_identity_check(f: &FieldTriple, reference: &Profile) -> f64 {
    energy_terms(f, reference).residual()
}
