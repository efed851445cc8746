//! Space-time grid, field storage and the forward solver of the controlled
//! hydrodynamic equation `∂_t μ = ½∂_xx μ − ∂_x[H μ(1−μ)]`.
//!
//! Densities live on nodes `x_i = −L + iΔx` at time levels `t_n = nΔt`;
//! drift and current live on the faces between neighbouring nodes and on
//! the time midpoints `t_{n+½}`. The node `i = (n_x−1)/2` sits at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::Profile;

/// Slack allowed on the density range before a step is declared unstable.
pub const CLIP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    /// Spatial half-extent.
    pub l: f64,
    pub nx: usize,
    /// Horizon.
    pub t: f64,
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(l: f64, nx: usize, t: f64, nt: usize) -> Result<Self> {
        if !(l > 0.0 && t > 0.0) {
            return Err(Error::InvalidArgument(format!("grid needs L > 0 and T > 0, got L={l} T={t}")));
        }
        if nx < 5 || nx % 2 == 0 {
            return Err(Error::InvalidArgument(format!("n_x must be odd and ≥ 5, got {nx}")));
        }
        if nt == 0 {
            return Err(Error::InvalidArgument("n_t must be positive".into()));
        }
        let g = Self { l, nx, t, nt };
        if g.dt() > g.dx() * g.dx() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "Δt = {:.3e} exceeds Δx² = {:.3e}; use n_t ≥ {}",
                g.dt(),
                g.dx() * g.dx(),
                g.min_nt()
            )));
        }
        Ok(g)
    }

    /// Smallest `n_t` with `Δt ≤ Δx²`.
    pub fn min_nt(&self) -> usize {
        (self.t / (self.dx() * self.dx())).ceil() as usize
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.l / (self.nx - 1) as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t / self.nt as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.dx()
    }

    /// Midpoint of the face between nodes `f` and `f+1`.
    #[inline]
    pub fn face_x(&self, f: usize) -> f64 {
        -self.l + (f as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn center(&self) -> usize {
        (self.nx - 1) / 2
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    #[inline]
    pub fn time_mid(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.dt()
    }

    pub fn faces(&self) -> usize {
        self.nx - 1
    }

    /// Profile sampled at the nodes.
    pub fn sample(&self, p: &Profile) -> Vec<f64> {
        (0..self.nx).map(|i| p.eval(self.x(i))).collect()
    }

    /// `∫_0^{Δx/2} γ − (Δx/2) γ(0)`: the part of the initial mass next to
    /// the origin that the node values miss when `γ` jumps there.
    pub fn origin_correction(&self, p: &Profile) -> f64 {
        let h = 0.5 * self.dx();
        p.integral(0.0, h) - h * p.eval(0.0)
    }

    /// Trapezoid weights on the nodes for `∫_lo^hi` of the piecewise-linear
    /// interpolant (signed when `hi < lo`). Both limits must lie in `[−L, L]`.
    pub fn interval_weights(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.nx];
        let (a, b, sign) = if hi >= lo { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
        let dx = self.dx();
        for k in 0..self.nx - 1 {
            let (xl, xr) = (self.x(k), self.x(k + 1));
            let s = a.max(xl);
            let e = b.min(xr);
            if e <= s {
                continue;
            }
            // ∫_s^e of the hat functions of nodes k and k+1
            let phi_r = |y: f64| (y - xl) / dx;
            let avg_r = 0.5 * (phi_r(s) + phi_r(e));
            w[k] += sign * (e - s) * (1.0 - avg_r);
            w[k + 1] += sign * (e - s) * avg_r;
        }
        w
    }
}

/// Space-time fields on a grid: `mu[n][i]` for `n ≤ n_t`, `h[n][f]` and
/// `j[n][f]` for `n < n_t` on faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTriple {
    pub grid: SpaceTimeGrid,
    pub mu: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub j: Vec<Vec<f64>>,
    #[serde(default)]
    pub flux: DriftFlux,
}

/// Face mobility used by the drift flux `h·M`.
///
/// `Centred` averages `μ(1−μ)` over the two nodes and is second order, but
/// it oscillates once the cell Péclet number `2|h|Δx` exceeds 2. `Upwind`
/// takes `μ_L(1−μ_R)` for `h ≥ 0` and `μ_R(1−μ_L)` otherwise: particles only
/// leave occupied cells and only enter free ones, so densities stay in
/// `[0, 1]` at any drift strength, at first-order accuracy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftFlux {
    #[default]
    Centred,
    Upwind,
}

impl std::str::FromStr for DriftFlux {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centred" | "centered" => Ok(Self::Centred),
            "upwind" => Ok(Self::Upwind),
            _ => Err(Error::InvalidArgument(format!("flux must be centred or upwind, got {s:?}"))),
        }
    }
}

impl DriftFlux {
    /// Mobility of face `f` (between nodes `f` and `f + 1`) for drift `h`.
    #[inline]
    pub(crate) fn mobility(self, h: f64, mu: &[f64], f: usize) -> f64 {
        match self {
            Self::Centred => face_mobility(mu, f),
            Self::Upwind if h >= 0.0 => mu[f] * (1.0 - mu[f + 1]),
            Self::Upwind => mu[f + 1] * (1.0 - mu[f]),
        }
    }

    /// Partial derivatives of [`Self::mobility`] in `μ_f` and `μ_{f+1}`.
    #[inline]
    pub(crate) fn partials(self, h: f64, mu: &[f64], f: usize) -> (f64, f64) {
        match self {
            Self::Centred => (0.5 * mobility_prime(mu[f]), 0.5 * mobility_prime(mu[f + 1])),
            Self::Upwind if h >= 0.0 => (1.0 - mu[f + 1], -mu[f]),
            Self::Upwind => (-mu[f + 1], 1.0 - mu[f]),
        }
    }
}

#[inline]
pub(crate) fn mobility(m: f64) -> f64 {
    m * (1.0 - m)
}

#[inline]
pub(crate) fn mobility_prime(m: f64) -> f64 {
    1.0 - 2.0 * m
}

/// Face mobility `½[m(μ_f) + m(μ_{f+1})]`.
#[inline]
pub(crate) fn face_mobility(mu: &[f64], f: usize) -> f64 {
    0.5 * (mobility(mu[f]) + mobility(mu[f + 1]))
}

/// Constant-coefficient tridiagonal factorisation of `I − αΔ` on the
/// interior nodes.
#[derive(Debug, Clone)]
pub(crate) struct Implicit {
    alpha: f64,
    cprime: Vec<f64>,
    denom: Vec<f64>,
}

impl Implicit {
    pub(crate) fn new(g: &SpaceTimeGrid) -> Self {
        let alpha = g.dt() / (4.0 * g.dx() * g.dx());
        let m = g.nx - 2;
        let (a, b, c) = (-alpha, 1.0 + 2.0 * alpha, -alpha);
        let mut cprime = vec![0.0; m];
        let mut denom = vec![0.0; m];
        for i in 0..m {
            let d = if i == 0 { b } else { b - a * cprime[i - 1] };
            denom[i] = d;
            cprime[i] = c / d;
        }
        Self { alpha, cprime, denom }
    }

    pub(crate) fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Solves in place; `rhs` holds the interior values.
    pub(crate) fn solve(&self, rhs: &mut [f64]) {
        let a = -self.alpha;
        let m = rhs.len();
        rhs[0] /= self.denom[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - a * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= self.cprime[i] * rhs[i + 1];
        }
    }
}

fn check_density(v: f64, n: usize) -> Result<()> {
    if !(v >= -CLIP_TOL && v <= 1.0 + CLIP_TOL) {
        return Err(Error::Unstable {
            step: n,
            value: v,
            advice: "reduce Δt, widen the domain or lower the drift".into(),
        });
    }
    Ok(())
}

/// Crank–Nicolson diffusion with an explicit centred drift flux. Boundary
/// nodes keep their initial values. The update is written in flux form, so
/// `μ^{n+1}_i − μ^n_i = −(Δt/Δx)(j^n_i − j^n_{i−1})` holds to rounding.
pub fn solve_forward(h: &[Vec<f64>], mu0: &[f64], g: &SpaceTimeGrid) -> Result<FieldTriple> {
    solve_forward_flux(h, mu0, g, DriftFlux::Centred)
}

/// [`solve_forward`] with a chosen drift flux.
pub fn solve_forward_flux(h: &[Vec<f64>], mu0: &[f64], g: &SpaceTimeGrid, flux: DriftFlux) -> Result<FieldTriple> {
    let imp = Implicit::new(g);
    solve_forward_with(h, mu0, g, &imp, flux)
}

pub(crate) fn solve_forward_with(
    h: &[Vec<f64>],
    mu0: &[f64],
    g: &SpaceTimeGrid,
    imp: &Implicit,
    flux: DriftFlux,
) -> Result<FieldTriple> {
    let (nx, nt) = (g.nx, g.nt);
    if mu0.len() != nx || h.len() != nt || h.iter().any(|r| r.len() != nx - 1) {
        return Err(Error::InvalidArgument("field shapes do not match the grid".into()));
    }
    for &v in mu0 {
        check_density(v, 0)?;
    }
    let mut mu = Vec::with_capacity(nt + 1);
    let mut j = Vec::with_capacity(nt);
    mu.push(mu0.to_vec());
    for n in 0..nt {
        let (next, jn) = advance(&mu[n], &h[n], g, imp, flux, n)?;
        j.push(jn);
        mu.push(next);
    }
    Ok(FieldTriple {
        grid: *g,
        mu,
        h: h.to_vec(),
        j,
        flux,
    })
}

/// One step of the scheme from `cur` with drift row `h`: the next density
/// and the step's face currents.
pub(crate) fn advance(
    cur: &[f64],
    h: &[f64],
    g: &SpaceTimeGrid,
    imp: &Implicit,
    flux: DriftFlux,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nx = g.nx;
    let dx = g.dx();
    let dt = g.dt();
    let alpha = imp.alpha();
    let drift: Vec<f64> = (0..nx - 1).map(|f| h[f] * flux.mobility(h[f], cur, f)).collect();
    let mut rhs: Vec<f64> = (1..nx - 1)
        .map(|i| {
            cur[i] + alpha * (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) - dt / dx * (drift[i] - drift[i - 1])
        })
        .collect();
    rhs[0] += alpha * cur[0];
    rhs[nx - 3] += alpha * cur[nx - 1];
    imp.solve(&mut rhs);
    let mut next = Vec::with_capacity(nx);
    next.push(cur[0]);
    next.extend_from_slice(&rhs);
    next.push(cur[nx - 1]);
    for &v in &next {
        check_density(v, n + 1)?;
    }
    let jn = (0..nx - 1)
        .map(|f| {
            let mbar_r = 0.5 * (cur[f + 1] + next[f + 1]);
            let mbar_l = 0.5 * (cur[f] + next[f]);
            -0.5 * (mbar_r - mbar_l) / dx + drift[f]
        })
        .collect();
    Ok((next, jn))
}

/// Zero drift on every face and step.
pub fn zero_drift(g: &SpaceTimeGrid) -> Vec<Vec<f64>> {
    vec![vec![0.0; g.nx - 1]; g.nt]
}

impl FieldTriple {
    /// `∫_0^T J(x, t) dt` at face `f`.
    pub fn face_current(&self, f: usize) -> f64 {
        let dt = self.grid.dt();
        self.j.iter().map(|r| r[f]).sum::<f64>() * dt
    }

    /// Mean face mobility over step `n`.
    pub(crate) fn mean_mobility(&self, n: usize, f: usize) -> f64 {
        let h = self.h[n][f];
        0.5 * (self.flux.mobility(h, &self.mu[n], f) + self.flux.mobility(h, &self.mu[n + 1], f))
    }
}
