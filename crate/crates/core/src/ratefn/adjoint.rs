//! Augmented-Lagrangian objective over the discrete drift (and, for local
//! equilibrium starts, the initial density) with its exact discrete adjoint.

use super::functionals::{h_d_prime, relative_entropy_nodes};
use super::grid::{mobility, solve_forward_with, DriftFlux, FieldTriple, Implicit, SpaceTimeGrid};
use crate::error::Result;

/// Scalar constraint on the solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `∫_0^T J(0, t) dt = a`.
    Current { a: f64 },
    /// `∫_0^T J(0, t) dt = ∫_0^a μ_T`, with node weights for the right side.
    Tagged { a: f64, weights: Vec<f64> },
}

/// Multiplier and penalty weight of `Φ = I₀ (+ h(μ₀; γ)) + νC + (β/2)C²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub nu: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub i0: f64,
    pub entropy: f64,
    pub constraint: f64,
    pub field: FieldTriple,
}

impl Evaluation {
    /// The rate value: dynamical cost plus initial entropy.
    pub fn rate(&self) -> f64 {
        self.i0 + self.entropy
    }
}

/// Decision variables: the drift on every face and step (step-major), then
/// for local-equilibrium problems the logits of the interior initial
/// densities.
pub struct Problem {
    pub grid: SpaceTimeGrid,
    imp: Implicit,
    /// Reference profile on the nodes; also the initial density for
    /// deterministic starts and the boundary values in every case.
    pub gamma: Vec<f64>,
    pub lem: bool,
    pub constraint: Constraint,
    /// Subtracted from the origin current; see
    /// [`SpaceTimeGrid::origin_correction`].
    pub origin_offset: f64,
    pub flux: DriftFlux,
    /// When set, the drift variables are `z` with `h = cap·tanh(z/cap)`.
    pub drift_cap: Option<f64>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
pub(crate) fn logit(m: f64) -> f64 {
    let m = m.clamp(1e-12, 1.0 - 1e-12);
    (m / (1.0 - m)).ln()
}

impl Problem {
    pub fn new(grid: SpaceTimeGrid, gamma: Vec<f64>, lem: bool, constraint: Constraint) -> Self {
        Self {
            imp: Implicit::new(&grid),
            grid,
            gamma,
            lem,
            constraint,
            origin_offset: 0.0,
            flux: DriftFlux::Centred,
            drift_cap: None,
        }
    }

    /// Bounds the drift smoothly by `cap`.
    pub fn with_drift_cap(mut self, cap: f64) -> Self {
        self.drift_cap = Some(cap);
        self
    }

    pub fn with_flux(mut self, flux: DriftFlux) -> Self {
        self.flux = flux;
        self
    }

    pub fn with_origin_offset(mut self, offset: f64) -> Self {
        self.origin_offset = offset;
        self
    }

    fn n_drift(&self) -> usize {
        self.grid.nt * self.grid.faces()
    }

    pub fn n_vars(&self) -> usize {
        self.n_drift() + if self.lem { self.grid.nx - 2 } else { 0 }
    }

    /// Packs drift rows and an initial density into a variable vector.
    pub fn pack(&self, h: &[Vec<f64>], mu0: Option<&[f64]>) -> Vec<f64> {
        let mut x: Vec<f64> = match self.drift_cap {
            None => h.iter().flatten().copied().collect(),
            Some(c) => h.iter().flatten().map(|&v| c * (v / c).clamp(-0.999, 0.999).atanh()).collect(),
        };
        if self.lem {
            let m = mu0.unwrap_or(&self.gamma);
            x.extend(m[1..self.grid.nx - 1].iter().map(|&v| logit(v)));
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let nf = self.grid.faces();
        let h = x[..self.n_drift()]
            .chunks(nf)
            .map(|r| match self.drift_cap {
                None => r.to_vec(),
                Some(c) => r.iter().map(|&z| c * (z / c).tanh()).collect(),
            })
            .collect();
        let mut mu0 = self.gamma.clone();
        if self.lem {
            for (i, &z) in x[self.n_drift()..].iter().enumerate() {
                mu0[i + 1] = sigmoid(z);
            }
        }
        (h, mu0)
    }

    /// `½Δt Σ_n (j_{c−1} + j_c)` less the offset: the integrated current
    /// at the origin.
    fn origin_current(&self, f: &FieldTriple) -> f64 {
        let c = self.grid.center();
        0.5 * (f.face_current(c - 1) + f.face_current(c)) - self.origin_offset
    }

    fn constraint_value(&self, f: &FieldTriple) -> f64 {
        let q = self.origin_current(f);
        match &self.constraint {
            Constraint::Current { a } => q - a,
            Constraint::Tagged { weights, .. } => {
                q - weights.iter().zip(&f.mu[self.grid.nt]).map(|(w, m)| w * m).sum::<f64>()
            }
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let (h, mu0) = self.unpack(x);
        let field = solve_forward_with(&h, &mu0, &self.grid, &self.imp, self.flux)?;
        let i0 = super::functionals::i0_evaluate(&field);
        let entropy = if self.lem {
            relative_entropy_nodes(&mu0, &self.gamma, self.grid.dx())
        } else {
            0.0
        };
        let constraint = self.constraint_value(&field);
        Ok(Evaluation {
            i0,
            entropy,
            constraint,
            field,
        })
    }

    /// `Φ` only; `None` when the forward solve leaves `[0, 1]`.
    pub fn value(&self, x: &[f64], pen: Penalty) -> Option<f64> {
        let e = self.evaluate(x).ok()?;
        Some(e.rate() + pen.nu * e.constraint + 0.5 * pen.beta * e.constraint * e.constraint)
    }

    /// `Φ` and `∇Φ` by a reverse sweep through the scheme.
    pub fn value_grad(&self, x: &[f64], pen: Penalty) -> Option<(f64, Vec<f64>, Evaluation)> {
        let e = self.evaluate(x).ok()?;
        let g = &self.grid;
        let (nx, nt, nf) = (g.nx, g.nt, g.faces());
        let (dx, dt) = (g.dx(), g.dt());
        let c = g.center();
        let f = &e.field;
        let con = e.constraint;
        let value = e.rate() + pen.nu * con + 0.5 * pen.beta * con * con;
        let theta = pen.nu + pen.beta * con;
        let fl = self.flux;

        // direct partials
        let mut gmu = vec![vec![0.0; nx]; nt + 1];
        let mut grad = vec![0.0; self.n_vars()];
        let w_q = theta * 0.5 * dt;
        for n in 0..nt {
            let (a, b) = (&f.mu[n], &f.mu[n + 1]);
            let hn = &f.h[n];
            let row = &mut grad[n * nf..(n + 1) * nf];
            for k in 0..nf {
                let hk = hn[k];
                if hk != 0.0 {
                    // I₀ = ½ΔxΔt Σ h² ½(M(a) + M(b))
                    let kap = 0.25 * dx * dt * hk * hk;
                    let (al, ar) = fl.partials(hk, a, k);
                    let (bl, br) = fl.partials(hk, b, k);
                    gmu[n][k] += kap * al;
                    gmu[n][k + 1] += kap * ar;
                    gmu[n + 1][k] += kap * bl;
                    gmu[n + 1][k + 1] += kap * br;
                    row[k] += dx * dt * hk * 0.5 * (fl.mobility(hk, a, k) + fl.mobility(hk, b, k));
                }
            }
            // origin current
            for k in [c - 1, c] {
                let hk = hn[k];
                let (pl, pr) = fl.partials(hk, a, k);
                gmu[n][k + 1] += w_q * (-0.25 / dx + hk * pr);
                gmu[n][k] += w_q * (0.25 / dx + hk * pl);
                gmu[n + 1][k + 1] += w_q * (-0.25 / dx);
                gmu[n + 1][k] += w_q * (0.25 / dx);
                row[k] += w_q * fl.mobility(hk, a, k);
            }
        }
        if let Constraint::Tagged { weights, .. } = &self.constraint {
            for (i, w) in weights.iter().enumerate() {
                gmu[nt][i] -= theta * w;
            }
        }

        // reverse sweep
        let alpha = self.imp.alpha();
        let mut p_next = vec![0.0; nx]; // p^{k+1}, zero on boundary nodes
        let mut rhs = vec![0.0; nx - 2];
        let mut q = vec![0.0; nf];
        let mut gmu0 = vec![0.0; nx];
        for k in (0..=nt).rev() {
            // contributions of step k (which maps μ^k to μ^{k+1}) through p^{k+1}
            let mut contrib = vec![0.0; nx];
            if k < nt {
                let a = &f.mu[k];
                let hk = &f.h[k];
                for fi in 0..nf {
                    q[fi] = dt / dx * (p_next[fi + 1] - p_next[fi]);
                }
                let row = &mut grad[k * nf..(k + 1) * nf];
                for fi in 0..nf {
                    row[fi] += q[fi] * fl.mobility(hk[fi], a, fi);
                    let (pl, pr) = fl.partials(hk[fi], a, fi);
                    contrib[fi] += q[fi] * hk[fi] * pl;
                    contrib[fi + 1] += q[fi] * hk[fi] * pr;
                }
                for i in 1..nx - 1 {
                    contrib[i] += (1.0 - 2.0 * alpha) * p_next[i] + alpha * (p_next[i - 1] + p_next[i + 1]);
                }
            }
            if k == 0 {
                for i in 1..nx - 1 {
                    gmu0[i] = gmu[0][i] + contrib[i];
                }
                break;
            }
            for i in 1..nx - 1 {
                rhs[i - 1] = gmu[k][i] + contrib[i];
            }
            self.imp.solve(&mut rhs);
            p_next[0] = 0.0;
            p_next[nx - 1] = 0.0;
            p_next[1..nx - 1].copy_from_slice(&rhs);
        }

        if let Some(cap) = self.drift_cap {
            for (gv, hv) in grad[..self.n_drift()].iter_mut().zip(f.h.iter().flatten()) {
                let r = hv / cap;
                *gv *= 1.0 - r * r;
            }
        }
        if self.lem {
            let off = self.n_drift();
            let mu0 = &f.mu[0];
            for i in 1..nx - 1 {
                let dmu = gmu0[i] + h_d_prime(mu0[i], self.gamma[i]) * dx;
                grad[off + i - 1] = dmu * mobility(mu0[i]);
            }
        }
        Some((value, grad, e))
    }
}
