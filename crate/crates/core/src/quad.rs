//! One-dimensional quadrature and Gaussian helpers shared by the numerical
//! modules.

use std::f64::consts::{PI, SQRT_2};

/// Standard normal density.
#[inline]
pub fn norm_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn norm_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / SQRT_2)
}

/// Upper tail `P(Z > u)`.
#[inline]
pub fn norm_sf(u: f64) -> f64 {
    0.5 * libm::erfc(u / SQRT_2)
}

/// Antiderivative of the normal CDF: `d/du [u Φ(u) + φ(u)] = Φ(u)`.
#[inline]
pub fn norm_cdf_integral(u: f64) -> f64 {
    u * norm_cdf(u) + norm_pdf(u)
}

/// Adaptive Simpson with Richardson correction.
///
/// `tol` is an absolute tolerance on the whole interval. Recursion depth is
/// capped, which bounds the cost on integrands with integrable singularities
/// at interior points.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson over consecutive breakpoints; the tolerance is shared
/// evenly between the pieces.
pub fn simpson_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    if breaks.len() < 2 {
        return 0.0;
    }
    let share = tol / (breaks.len() - 1) as f64;
    breaks
        .windows(2)
        .map(|w| simpson(&f, w[0], w[1], share))
        .sum()
}

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Fixed 8-point Gauss–Legendre rule on `[a, b]`.
#[inline]
pub fn gauss_legendre8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for k in 0..4 {
        let d = h * GL8_NODES[k];
        acc += GL8_WEIGHTS[k] * (f(c - d) + f(c + d));
    }
    acc * h
}

/// Composite 8-point Gauss–Legendre on `panels` equal panels.
pub fn gauss_composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            gauss_legendre8(&f, lo, lo + h)
        })
        .sum()
}

/// Golden-section search for the minimum of a unimodal function on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // endpoints are candidates too
    [(a, f(a)), (b, f(b)), (x, fx)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Bisection for a root of a function with `f(lo) < 0 < f(hi)` (or the
/// reverse). Stops when `|f| <= ftol` or the bracket collapses.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, ftol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= ftol || mid == lo || mid == hi {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_and_gaussian() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
        let g = simpson(norm_pdf, -12.0, 12.0, 1e-13);
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_tails_and_antiderivative() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) + norm_sf(1.0) - 1.0).abs() < 1e-15);
        assert!(norm_sf(40.0) > 0.0 || norm_sf(40.0) == 0.0);
        let num = simpson(norm_cdf, -1.0, 2.0, 1e-13);
        let exact = norm_cdf_integral(2.0) - norm_cdf_integral(-1.0);
        assert!((num - exact).abs() < 1e-12);
    }

    #[test]
    fn golden_and_bisect() {
        let (x, v) = golden_section(|x| (x - 1.3).powi(2) + 2.0, 0.0, 10.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-6 && (v - 2.0).abs() < 1e-10);
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gauss_composite_exp() {
        let v = gauss_composite(f64::exp, 0.0, 1.0, 4);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
