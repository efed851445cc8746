//! Small sample-statistics helpers used by the experiments.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// Standard error of the variance estimate, from the fourth central
    /// moment.
    pub var_se: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary { n, mean: f64::NAN, var: f64::NAN, se: f64::NAN, var_se: f64::NAN };
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(a, b), &x| {
        let d = (x - mean) * (x - mean);
        (a + d, b + d * d)
    });
    let var = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
    let mu2 = m2 / nf;
    let mu4 = m4 / nf;
    let var_se = if n > 1 { ((mu4 - mu2 * mu2) / nf).max(0.0).sqrt() } else { f64::NAN };
    Summary { n, mean, var, se: (var / nf).sqrt(), var_se }
}

/// Wilson score interval for a binomial proportion at `z` standard
/// deviations.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Weighted least squares `y ≈ α + β x`; returns `(α, β, se(β))` where the
/// standard error takes the weights as inverse variances.
pub fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - xm) * (a - xm)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let beta = sxy / sxx;
    (ym - beta * xm, beta, (1.0 / sxx).sqrt())
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    weighted_line(x, y, &vec![1.0; x.len()]).1
}
