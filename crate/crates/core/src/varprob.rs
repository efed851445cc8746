//! The quadratic space-time problem behind the small-deviation constants and
//! the dynamical variances of the current.
//!
//! The functional is
//! `𝓜[M] = ¼∫M_x(1,x)²dx + ½∫∫M_t² + ⅛∫∫M_xx²` over `M(0,·) ≡ 0`,
//! `M(1,0) = 1`. In Fourier variables its minimiser has boundary spectrum
//! `M̂(1,y) = c/K(y)`, and the inverse transform is available in closed form:
//! `M(t,x) = c∫_{1−t}^{1+t} s^{−1/2} e^{−x²/2s} ds` with `c = 1/(2√2)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gauss_composite, gauss_legendre8, simpson};

/// `k(y) = (y²/4) coth(y²/2)`, with `k(0) = ½`.
pub fn k_kernel(y: f64) -> f64 {
    K_kernel(y) - 0.25 * y * y
}

/// `K(y) = (y²/2) e^{y²/2} / (e^{y²/2} − e^{−y²/2}) = (y²/2)/(1 − e^{−y²})`,
/// with `K(0) = ½`.
#[allow(non_snake_case)]
pub fn K_kernel(y: f64) -> f64 {
    let y2 = y * y;
    if y2 < 1e-300 {
        return 0.5;
    }
    0.5 * y2 / -(-y2).exp_m1()
}

/// `1/K(y) = 2(1 − e^{−y²})/y²`, smooth through the origin.
#[allow(non_snake_case)]
pub fn K_inverse(y: f64) -> f64 {
    let y2 = y * y;
    if y2 < 1e-8 {
        // 2(1 − y²/2 + y⁴/6)
        return 2.0 - y2 + y2 * y2 / 3.0;
    }
    2.0 * -(-y2).exp_m1() / y2
}

/// `∫_ℝ K⁻¹ dy`: quadrature on `[0, 8]` plus the exact `2/y²` tail (the
/// Gaussian remainder beyond 8 is below `e^{−64}`).
#[allow(non_snake_case)]
pub fn integral_K_inverse() -> f64 {
    let y_max = 8.0;
    let body: f64 = (0..64)
        .map(|k| {
            let a = y_max * k as f64 / 64.0;
            gauss_legendre8(K_inverse, a, a + y_max / 64.0)
        })
        .sum();
    2.0 * (body + 2.0 / y_max)
}

/// `inf 𝓜 = 2π / ∫K⁻¹`.
pub fn inf_m() -> f64 {
    2.0 * PI / integral_K_inverse()
}

/// Normalisation `c = √(2π) / ∫K⁻¹` of the minimising spectrum.
pub fn spectral_constant() -> f64 {
    (2.0 * PI).sqrt() / integral_K_inverse()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSolution {
    pub y_grid: Vec<f64>,
    /// `M̂(1, y) = c/K(y)` on `y_grid`.
    pub m_hat_1: Vec<f64>,
    pub c: f64,
    /// `∫K⁻¹`.
    pub integral: f64,
    /// `inf 𝓜`.
    pub value: f64,
}

/// Spectral solution sampled at `n` points of `[0, y_max]`.
pub fn spectral_solution(n: usize, y_max: f64) -> SpectralSolution {
    let integral = integral_K_inverse();
    let c = (2.0 * PI).sqrt() / integral;
    let y_grid: Vec<f64> = (0..n).map(|i| y_max * i as f64 / (n - 1).max(1) as f64).collect();
    let m_hat_1 = y_grid.iter().map(|&y| c * K_inverse(y)).collect();
    SpectralSolution {
        y_grid,
        m_hat_1,
        c,
        integral,
        value: 2.0 * PI / integral,
    }
}

/// `M̂(t, y) = M̂(1, y) sinh(ty²/2)/sinh(y²/2)
///          = (2c/y²)(e^{−(1−t)y²/2} − e^{−(1+t)y²/2})`.
pub fn m_hat(t: f64, y: f64) -> f64 {
    let c = spectral_constant();
    let u = 0.5 * y * y;
    if u < 1e-12 {
        return 2.0 * c * t;
    }
    c / u * (-(1.0 - t) * u).exp() * -(-2.0 * t * u).exp_m1()
}

/// `M(t, x)` by numerical inverse Fourier transform of [`m_hat`]; used to
/// cross-check the closed form.
pub fn minimizer_fourier(t: f64, x: f64) -> f64 {
    // for t < 1 the spectrum decays like e^{−(1−t)y²/2}; at t = 1 like 1/y²
    let y_max = if t < 1.0 { (80.0 / (1.0 - t)).sqrt().min(2e4) } else { 2e4 };
    let body = simpson(|y| m_hat(t, y) * (x * y).cos(), 0.0, y_max.min(60.0), 1e-13)
        + if y_max > 60.0 {
            simpson(|y| m_hat(t, y) * (x * y).cos(), 60.0, y_max, 1e-12)
        } else {
            0.0
        };
    2.0 * body / (2.0 * PI).sqrt()
}

/// `φ(s, x) = s^{−1/2} e^{−x²/2s}`, zero at `s = 0` off the origin.
#[inline]
fn phi(s: f64, x: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    (-x * x / (2.0 * s)).exp() / s.sqrt()
}

/// Antiderivative `G(s, x) = 2√s e^{−x²/2s} − √(2π)|x| erfc(|x|/√(2s))` of
/// `φ` in `s`, with `G(0, x) = 0`.
#[inline]
fn g_prim(s: f64, x: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    2.0 * s.sqrt() * (-x * x / (2.0 * s)).exp() - (2.0 * PI).sqrt() * ax * libm::erfc(ax / (2.0 * s).sqrt())
}

/// Value and derivatives of the minimiser at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerPoint {
    pub m: f64,
    pub m_t: f64,
    pub m_x: f64,
    pub m_xx: f64,
}

/// Closed-form minimiser and its derivatives:
/// `M_t = c[φ(1+t) + φ(1−t)]`, `M_xx = 2c[φ(1+t) − φ(1−t)]`,
/// `M_x = −c√(2π) sgn(x)[erfc(|x|/√(2(1+t))) − erfc(|x|/√(2(1−t)))]`.
pub fn minimizer(t: f64, x: f64) -> MinimizerPoint {
    let c = 0.25 * SQRT_2;
    let (sp, sm) = (1.0 + t, 1.0 - t);
    let erfc_at = |s: f64| {
        if s <= 0.0 {
            if x == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            libm::erfc(x.abs() / (2.0 * s).sqrt())
        }
    };
    let sgn = if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    };
    MinimizerPoint {
        m: c * (g_prim(sp, x) - g_prim(sm, x)),
        m_t: c * (phi(sp, x) + phi(sm, x)),
        m_x: -c * (2.0 * PI).sqrt() * sgn * (erfc_at(sp) - erfc_at(sm)),
        m_xx: 2.0 * c * (phi(sp, x) - phi(sm, x)),
    }
}

/// Quadrature grid for `𝓜` on `[0, 1] × [−L, L]`: Gauss–Legendre in
/// `v = √(1−t)` (which absorbs the `(1−t)^{−1/2}` singularity of the time
/// terms at `t = 1`), trapezoid in `ξ` with `x = A sinh ξ` (which resolves
/// the shrinking width `√(1−t)` around the origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerGrid {
    pub l: f64,
    /// Time nodes (a multiple of 8).
    pub nt: usize,
    /// Space intervals.
    pub nx: usize,
    /// Scale `A` of the sinh map.
    pub a: f64,
}

impl MinimizerGrid {
    pub fn new(l: f64, nt: usize, nx: usize) -> Result<Self> {
        if l < 8.0 {
            return Err(Error::InvalidArgument(format!("need L ≥ 8, got {l}")));
        }
        if nt == 0 || nt % 8 != 0 || nx < 16 || nx % 2 == 1 {
            return Err(Error::InvalidArgument(format!(
                "n_t must be a positive multiple of 8 and n_x an even number ≥ 16, got {nt}×{nx}"
            )));
        }
        Ok(Self { l, nt, nx, a: 0.01 })
    }

    /// Time nodes and weights.
    pub fn times(&self) -> Vec<(f64, f64)> {
        const NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
        const WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
        let panels = self.nt / 8;
        let h = 1.0 / panels as f64;
        let mut out = Vec::with_capacity(self.nt);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (z, w) in NODES.iter().zip(WEIGHTS) {
                for s in [-1.0, 1.0] {
                    let v = mid + s * 0.5 * h * z;
                    // t = 1 − v², dt = 2v dv
                    out.push((1.0 - v * v, 0.5 * h * w * 2.0 * v));
                }
            }
        }
        out
    }

    /// Space nodes and trapezoid weights.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let xi_max = (self.l / self.a).asinh();
        let h = 2.0 * xi_max / self.nx as f64;
        (0..=self.nx)
            .map(|k| {
                let xi = -xi_max + k as f64 * h;
                let w = if k == 0 || k == self.nx { 0.5 } else { 1.0 };
                (self.a * xi.sinh(), w * h * self.a * xi.cosh())
            })
            .collect()
    }
}

/// `𝓜` on the grid for a field given by its derivatives: `bulk(t, x)`
/// returns `(M_t, M_xx)` and `edge(x)` returns `M_x(1, x)`.
pub fn m_functional<B, E>(g: &MinimizerGrid, bulk: B, edge: E) -> f64
where
    B: Fn(f64, f64) -> (f64, f64),
    E: Fn(f64) -> f64,
{
    let xs = g.points();
    let edge_term: f64 = xs.iter().map(|&(x, w)| w * edge(x).powi(2)).sum();
    let bulk_term: f64 = g
        .times()
        .iter()
        .map(|&(t, wt)| {
            let row: f64 = xs
                .iter()
                .map(|&(x, wx)| {
                    let (mt, mxx) = bulk(t, x);
                    wx * (0.5 * mt * mt + 0.125 * mxx * mxx)
                })
                .sum();
            wt * row
        })
        .sum();
    0.25 * edge_term + bulk_term
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub grid: MinimizerGrid,
    /// `M` on the time × space nodes of the grid.
    pub field: Vec<Vec<f64>>,
    pub value: f64,
}

/// The minimiser on the grid and its grid value of `𝓜`.
pub fn reconstruct_minimizer(g: &MinimizerGrid) -> Reconstruction {
    let xs = g.points();
    let field = g
        .times()
        .iter()
        .map(|&(t, _)| xs.iter().map(|&(x, _)| minimizer(t, x).m).collect())
        .collect();
    let value = m_functional(
        g,
        |t, x| {
            let p = minimizer(t, x);
            (p.m_t, p.m_xx)
        },
        |x| minimizer(1.0, x).m_x,
    );
    Reconstruction {
        grid: g.clone(),
        field,
        value,
    }
}

/// Gaussian bump `B(t, x) = t² exp(−(x−x₀)²/2w²)` added to the minimiser
/// with weight `ε`, renormalised so that `M(1, 0) = 1`; returns `𝓜` of the
/// perturbed field on the grid.
pub fn perturbed_value(g: &MinimizerGrid, eps: f64, x0: f64, w: f64) -> f64 {
    let beta = |x: f64| (-(x - x0).powi(2) / (2.0 * w * w)).exp();
    let beta_x = |x: f64| -(x - x0) / (w * w) * beta(x);
    let beta_xx = |x: f64| ((x - x0).powi(2) / w.powi(4) - 1.0 / (w * w)) * beta(x);
    let norm = 1.0 + eps * beta(0.0);
    m_functional(
        g,
        |t, x| {
            let p = minimizer(t, x);
            (
                (p.m_t + eps * 2.0 * t * beta(x)) / norm,
                (p.m_xx + eps * t * t * beta_xx(x)) / norm,
            )
        },
        |x| (minimizer(1.0, x).m_x + eps * beta_x(x)) / norm,
    )
}

/// Transition probabilities of the rate-one continuous-time simple random
/// walk on `{−R, …, R}` (absorbed outside), at `n_out + 1` equally spaced
/// times in `[0, t_max]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkKernel {
    pub t_grid: Vec<f64>,
    pub range: usize,
    /// `p[k][j + R] = P(S_{t_k} = j)`.
    pub p: Vec<Vec<f64>>,
}

impl WalkKernel {
    pub fn at(&self, k: usize, j: i64) -> f64 {
        let idx = j + self.range as i64;
        if idx < 0 || idx as usize >= self.p[k].len() {
            0.0
        } else {
            self.p[k][idx as usize]
        }
    }
}

/// RK4 step for tabulated kernels.
const WALK_DT: f64 = 0.005;
/// RK4 step for long occupation integrals, where only slow modes survive.
const OCCUPATION_DT: f64 = 0.02;
const MASS_TOL: f64 = 1e-10;

/// `out = A p` with `(Ap)_j = ½p_{j−1} + ½p_{j+1} − p_j`, zero outside.
fn walk_generator(p: &[f64], out: &mut [f64]) {
    let n = p.len();
    for j in 0..n {
        let l = if j > 0 { p[j - 1] } else { 0.0 };
        let r = if j + 1 < n { p[j + 1] } else { 0.0 };
        out[j] = 0.5 * (l + r) - p[j];
    }
}

/// One classical RK4 step; for this linear autonomous system it equals the
/// fourth-order Taylor polynomial of `e^{hA}`, evaluated by Horner.
fn rk4_step(p: &mut [f64], h: f64, q: &mut [f64], tmp: &mut [f64]) {
    q.copy_from_slice(p);
    for k in (1..=4).rev() {
        walk_generator(q, tmp);
        let f = h / k as f64;
        for ((qi, &pi), &ti) in q.iter_mut().zip(p.iter()).zip(tmp.iter()) {
            *qi = pi + f * ti;
        }
    }
    p.copy_from_slice(q);
}

fn check_mass(p: &[f64]) -> Result<()> {
    let lost = 1.0 - p.iter().sum::<f64>();
    if lost.abs() > MASS_TOL {
        return Err(Error::MassLoss { lost });
    }
    Ok(())
}

/// Site range `⌈7√t⌉ + 20`, enough to keep the absorbed mass below `1e−10`.
pub fn default_range(t_max: f64) -> usize {
    (7.0 * t_max.sqrt()).ceil() as usize + 20
}

pub fn walk_kernel(t_max: f64, range: usize, n_out: usize) -> Result<WalkKernel> {
    if !(t_max > 0.0) || n_out == 0 {
        return Err(Error::InvalidArgument(format!("need t_max > 0 and n_out ≥ 1, got {t_max}, {n_out}")));
    }
    let n = 2 * range + 1;
    let mut p = vec![0.0; n];
    p[range] = 1.0;
    let (mut q, mut tmp) = (vec![0.0; n], vec![0.0; n]);
    let mut out = vec![p.clone()];
    let mut t_grid = vec![0.0];
    for k in 1..=n_out {
        let span = t_max / n_out as f64;
        let steps = (span / WALK_DT).ceil() as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            rk4_step(&mut p, h, &mut q, &mut tmp);
        }
        check_mass(&p)?;
        out.push(p.clone());
        t_grid.push(k as f64 * span);
    }
    Ok(WalkKernel { t_grid, range, p: out })
}

/// `∫_0^T p(t, j) dt` for every site, by the trapezoid rule over the RK4
/// steps.
pub fn occupation_integrals(t: f64, range: usize) -> Result<Vec<f64>> {
    let n = 2 * range + 1;
    let mut p = vec![0.0; n];
    p[range] = 1.0;
    let (mut q, mut tmp) = (vec![0.0; n], vec![0.0; n]);
    let steps = (t / OCCUPATION_DT).ceil() as usize;
    let h = t / steps as f64;
    let mut acc: Vec<f64> = p.iter().map(|v| 0.5 * h * v).collect();
    for s in 0..steps {
        rk4_step(&mut p, h, &mut q, &mut tmp);
        let w = if s + 1 == steps { 0.5 * h } else { h };
        for (a, v) in acc.iter_mut().zip(&p) {
            *a += w * v;
        }
    }
    check_mass(&p)?;
    Ok(acc)
}

/// `(√2 − 1) ρ(1−ρ)/√π`.
pub fn static_limit(rho: f64) -> f64 {
    (SQRT_2 - 1.0) * rho * (1.0 - rho) / PI.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynVariance {
    pub t: f64,
    pub q0: f64,
    pub q0_over_sqrt_t: f64,
    pub limit: f64,
}

/// `Q₀(T) = ρ(1−ρ) Σ_i |½∫_0^T p(t,i+1) − p(t,i) dt|²`, the variance of the
/// current's conditional mean under the equilibrium initial law.
pub fn dyn_variance_current(t: f64, rho: f64) -> Result<DynVariance> {
    dyn_variance_current_with(t, rho, default_range(t))
}

pub fn dyn_variance_current_with(t: f64, rho: f64, range: usize) -> Result<DynVariance> {
    if !(t > 0.0) || !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("need T > 0 and ρ ∈ [0, 1], got {t}, {rho}")));
    }
    let occ = occupation_integrals(t, range)?;
    let sum: f64 = occ.windows(2).map(|w| (0.5 * (w[1] - w[0])).powi(2)).sum();
    let q0 = rho * (1.0 - rho) * sum;
    Ok(DynVariance {
        t,
        q0,
        q0_over_sqrt_t: q0 / t.sqrt(),
        limit: static_limit(rho),
    })
}

/// `(√2/(8√(πT))) ∫_0^T∫_0^T (t+s)^{−3/2} ds dt` by double quadrature, in
/// the variables `t = Tu²`, `s = Tv²`; the exact value is `(√2−1)/√π`.
pub fn q2_crosscheck(t: f64) -> f64 {
    // integrand after substitution: 4uv (u²+v²)^{−3/2} T^{1/2}
    let inner = |u: f64| {
        if u == 0.0 {
            return 0.0;
        }
        // split where the v-profile bends
        let f = |v: f64| 4.0 * u * v / (u * u + v * v).powf(1.5);
        let mut acc = gauss_composite(f, 0.0, u.min(1.0), 4);
        let mut lo = u;
        while lo < 1.0 {
            let hi = (2.0 * lo).min(1.0);
            acc += gauss_composite(f, lo, hi, 2);
            lo = hi;
        }
        acc
    };
    let mut total = 0.0;
    // geometric panels towards u = 0
    let mut hi = 1.0;
    for _ in 0..40 {
        let lo = hi * 0.5;
        total += gauss_composite(inner, lo, hi, 2);
        hi = lo;
    }
    SQRT_2 / (8.0 * (PI * t).sqrt()) * total * t.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceTargets {
    pub rho: f64,
    pub sigma2_j: f64,
    pub sigma2_x: f64,
    pub sigma2_j_dyn: f64,
    pub sigma2_x_dyn: f64,
}

/// Equilibrium and dynamical variances of `J/t^{1/4}` and `X/t^{1/4}`.
pub fn variance_targets(rho: f64) -> Result<VarianceTargets> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < ρ < 1, got {rho}")));
    }
    let m = rho * (1.0 - rho);
    let v = VarianceTargets {
        rho,
        sigma2_j: (2.0 / PI).sqrt() * m,
        sigma2_x: (2.0 / PI).sqrt() * (1.0 - rho) / rho,
        sigma2_j_dyn: m / PI.sqrt(),
        sigma2_x_dyn: (1.0 - rho) / (rho * PI.sqrt()),
    };
    debug_assert!((v.sigma2_j - v.sigma2_j_dyn - static_limit(rho)).abs() < 1e-14);
    Ok(v)
}
