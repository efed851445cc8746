use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssep_core::profiles::Profile;
use ssep_core::quad::gauss_composite;
use ssep_core::ratefn::{
    energy_terms, h_d, i0_evaluate, integrated_current, mass_displacement, relative_entropy, solve_forward,
    zero_drift, FieldTriple, SpaceTimeGrid,
};
use ssep_core::trialbounds::{self, TrialParams};

fn smooth_drift(g: &SpaceTimeGrid) -> Vec<Vec<f64>> {
    (0..g.nt)
        .map(|n| {
            let t = g.time_mid(n);
            (0..g.faces())
                .map(|f| {
                    let x = g.face_x(f);
                    (0.4 * (2.0 * t).sin() + 0.3 * t * x) * (-x * x).exp()
                })
                .collect()
        })
        .collect()
}

fn smooth_start(g: &SpaceTimeGrid) -> Vec<f64> {
    (0..g.nx).map(|i| 0.5 + 0.2 * (g.x(i)).tanh()).collect()
}

#[test]
fn i0_vanishes_without_drift() {
    let g = SpaceTimeGrid::new(4.0, 81, 1.0, 200).unwrap();
    let p = Profile::step(0.8, 0.2).unwrap();
    let f = solve_forward(&zero_drift(&g), &g.sample(&p), &g).unwrap();
    assert_eq!(i0_evaluate(&f), 0.0);
}

#[test]
fn i0_of_trial_field_matches_quadrature_and_bound() {
    let p = Profile::constant(0.5).unwrap();
    let t = 1.0;
    let q = TrialParams { lambda: 0.2, l: 1.5 };
    let g = SpaceTimeGrid::new(4.0, 201, t, 625).unwrap();
    let f = trialbounds::trial_field(&p, q, &g).unwrap();
    let v = i0_evaluate(&f);
    // ½ ∫∫ (Hμ(1−μ))² / (μ(1−μ)) with the closed-form trial density
    let integrand = |s: f64, x: f64| {
        let m = trialbounds::trial_density(&p, t, q, s, x);
        let h = trialbounds::trial_drift(&p, t, q, s, x);
        0.5 * h * h * m * (1.0 - m)
    };
    let exact = gauss_composite(
        |s| gauss_composite(|x| integrand(s, x), -q.l, q.l, 64),
        0.0,
        t,
        64,
    );
    assert!((v - exact).abs() <= 0.02 * exact, "grid {v} quadrature {exact}");
    let bound = trialbounds::i0_bound(&p, t, q).unwrap();
    assert!(v <= bound, "{v} > bound {bound}");
}

#[test]
fn i0_grows_with_drift_amplitude() {
    let g = SpaceTimeGrid::new(3.0, 61, 0.5, 100).unwrap();
    let mu0 = smooth_start(&g);
    let h = smooth_drift(&g);
    let h2: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
    let a = i0_evaluate(&solve_forward(&h, &mu0, &g).unwrap());
    let b = i0_evaluate(&solve_forward(&h2, &mu0, &g).unwrap());
    assert!(b > a && a > 0.0);
    assert!((b / a - 4.0).abs() < 0.5, "ratio {}", b / a);
}

#[test]
fn relative_entropy_examples() {
    let g = SpaceTimeGrid::new(2.5, 51, 1.0, 100).unwrap();
    let p = Profile::step(0.3, 0.7).unwrap();
    let gamma = g.sample(&p);
    assert_eq!(relative_entropy(&gamma, &p, &g), 0.0);

    let half = Profile::constant(0.5).unwrap();
    let v = relative_entropy(&vec![0.6; g.nx], &half, &g);
    let hd = 0.6 * 1.2f64.ln() + 0.4 * 0.8f64.ln();
    assert!((v - 2.0 * g.l * hd).abs() < 1e-12);

    let full = Profile::constant(1.0).unwrap();
    assert!(relative_entropy(&vec![0.5; g.nx], &full, &g).is_infinite());
    assert_eq!(h_d(0.0, 0.0), 0.0);
    assert_eq!(h_d(1.0, 1.0), 0.0);
}

#[test]
fn hellinger_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let a: f64 = rng.random();
        let b: f64 = rng.random_range(1e-9..1.0);
        let hell = (a.sqrt() - b.sqrt()).powi(2);
        assert!(h_d(a, b) >= hell - 1e-15, "h_d({a}; {b}) = {} < {hell}", h_d(a, b));
    }
}

#[test]
fn heat_flow_of_step_is_half_at_origin() {
    let p = Profile::step(0.8, 0.2).unwrap();
    let g = SpaceTimeGrid::new(10.0, 401, 1.0, 400).unwrap();
    let f = solve_forward(&zero_drift(&g), &g.sample(&p), &g).unwrap();
    let v = f.mu[g.nt][g.center()];
    assert!((v - 0.5).abs() < 1e-3, "{v}");
}

#[test]
fn heat_flow_matches_convolution() {
    let p = Profile::table(0.7, 0.3, &[(-1.0, 0.7), (1.0, 0.3)]).unwrap();
    let err = |nx: usize, nt: usize| {
        let g = SpaceTimeGrid::new(8.0, nx, 1.0, nt).unwrap();
        let f = solve_forward(&zero_drift(&g), &g.sample(&p), &g).unwrap();
        (0..g.nx)
            .map(|i| (f.mu[g.nt][i] - p.heat_convolve(1.0, g.x(i)).unwrap()).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(161, 100), err(321, 400));
    assert!(e2 < 1e-4, "{e2}");
    assert!(e1 / e2 > 3.0, "order ratio {}", e1 / e2);
}

fn trial_solution(nx: usize, nt: usize) -> f64 {
    let p = Profile::table(0.6, 0.4, &[(-1.0, 0.6), (1.0, 0.4)]).unwrap();
    let t = 1.0;
    let q = TrialParams { lambda: 0.15, l: 1.2 };
    let g = SpaceTimeGrid::new(6.0, nx, t, nt).unwrap();
    let trial = trialbounds::trial_field(&p, q, &g).unwrap();
    let f = solve_forward(&trial.h, &g.sample(&p), &g).unwrap();
    (0..g.nx)
        .map(|i| (f.mu[g.nt][i] - trialbounds::trial_density(&p, t, q, t, g.x(i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn trial_drift_reproduces_trial_density() {
    let (e1, e2) = (trial_solution(121, 100), trial_solution(241, 400));
    assert!(e2 < 2e-3, "{e2}");
    assert!(e1 / e2 > 3.0, "order ratio {} ({e1} → {e2})", e1 / e2);
}

fn random_field(seed: u64) -> FieldTriple {
    // drift and initial slope both negligible at the edges
    let g = SpaceTimeGrid::new(7.0, 141, 1.0, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.random_range(-0.5..0.5), rng.random_range(0.3..2.0), rng.random_range(-2.0..2.0)))
        .collect();
    let h: Vec<Vec<f64>> = (0..g.nt)
        .map(|n| {
            let t = g.time_mid(n);
            (0..g.faces())
                .map(|k| {
                    let x = g.face_x(k);
                    modes.iter().map(|(a, w, c)| a * (w * x + c * t).sin() * (-0.5 * x * x).exp()).sum()
                })
                .collect()
        })
        .collect();
    let mu0: Vec<f64> = (0..g.nx).map(|i| 0.5 + 0.3 * (g.x(i) * rng.random_range(0.5..1.5)).tanh()).collect();
    solve_forward(&h, &mu0, &g).unwrap()
}

#[test]
fn integrated_current_is_lipschitz() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..8 {
        let f = random_field(seed);
        let dx = f.grid.dx();
        for _ in 0..50 {
            let a = rng.random_range(-5.0..5.0);
            let b = rng.random_range(-5.0..5.0);
            let d = (integrated_current(&f, a) - integrated_current(&f, b)).abs();
            assert!(d <= (b - a).abs() + 2.0 * dx, "{d} over [{a}, {b}]");
        }
    }
}

#[test]
fn integrated_current_examples() {
    let g = SpaceTimeGrid::new(3.0, 61, 1.0, 100).unwrap();
    let f = solve_forward(&zero_drift(&g), &vec![0.35; g.nx], &g).unwrap();
    for k in 0..=20 {
        assert!(integrated_current(&f, -3.0 + 0.3 * k as f64).abs() < 1e-14);
    }
    for seed in 0..4 {
        let f = random_field(seed);
        let q0 = integrated_current(&f, 0.0);
        let m = mass_displacement(&f);
        let q_edge = f.face_current(f.grid.faces() - 1);
        assert!((q0 - m - q_edge).abs() < 1e-12);
        assert!((q0 - m).abs() < 1e-3, "{q0} vs {m}");
    }
}

#[test]
fn energy_identity_for_heat_flow() {
    // μ₀ = γ̂ = σ_{0.3} * step, sampled on the grid
    let base = Profile::step(0.7, 0.3).unwrap();
    let g = SpaceTimeGrid::new(10.0, 401, 1.0, 400).unwrap();
    let mu0: Vec<f64> = (0..g.nx).map(|i| base.heat_convolve(0.3, g.x(i)).unwrap()).collect();
    let pts: Vec<(f64, f64)> = (0..g.nx).map(|i| (g.x(i), mu0[i])).collect();
    let hat = Profile::table(mu0[0], mu0[g.nx - 1], &pts).unwrap();
    let f = solve_forward(&zero_drift(&g), &mu0, &g).unwrap();
    let e = energy_terms(&f, &hat);
    assert_eq!(e.i0, 0.0);
    assert!(e.residual() <= 1e-3, "{e:?}");
}

#[test]
fn energy_identity_constant_fields() {
    let g = SpaceTimeGrid::new(2.0, 41, 1.0, 400).unwrap();
    let f = solve_forward(&zero_drift(&g), &vec![0.4; g.nx], &g).unwrap();
    let e = energy_terms(&f, &Profile::constant(0.4).unwrap());
    for v in [e.i0, e.gradient, e.entropy, e.flux, e.current] {
        assert!(v.abs() < 1e-14);
    }
}

#[test]
fn energy_identity_is_second_order() {
    // the reference matches μ at the pinned edges, so no boundary flux enters
    let hat = Profile::table(0.5 - 0.2 * 4f64.tanh(), 0.5 + 0.2 * 4f64.tanh(), &[(-4.0, 0.5 - 0.2 * 4f64.tanh()), (4.0, 0.5 + 0.2 * 4f64.tanh())]).unwrap();
    let residual = |nx: usize, nt: usize| {
        let g = SpaceTimeGrid::new(4.0, nx, 1.0, nt).unwrap();
        let f = solve_forward(&smooth_drift(&g), &smooth_start(&g), &g).unwrap();
        energy_terms(&f, &hat).residual()
    };
    let r1 = residual(81, 100);
    let r2 = residual(161, 400);
    let r3 = residual(321, 1600);
    assert!(r1 / r2 > 3.0 && r2 / r3 > 3.0, "{r1} {r2} {r3}");
}
