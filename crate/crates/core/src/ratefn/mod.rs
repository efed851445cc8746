//! Discretised rate functional for the controlled hydrodynamic equation and
//! its constrained minimisation, giving numerical `𝕁(a)` (current) and
//! `𝕀(a)` (tagged particle).

mod adjoint;
mod functionals;
mod grid;
mod lbfgs;
mod optimize;

use serde::{Deserialize, Serialize};

pub use adjoint::{Constraint, Evaluation, Penalty, Problem};
pub use functionals::{
    energy_identity_check, energy_terms, h_d, i0_evaluate, integrated_current, mass_displacement, relative_entropy,
    EnergyTerms, DELTA,
};
pub use grid::{solve_forward, solve_forward_flux, zero_drift, DriftFlux, FieldTriple, SpaceTimeGrid, CLIP_TOL};
pub use lbfgs::{minimize as lbfgs_minimize, LbfgsOptions, LbfgsResult};
pub use optimize::{
    auto_flux, default_grid, minimize_rate_current, minimize_rate_tagged, rate_curve, InitKind, RateOptions, RateSolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    UpperBound,
    NumericMin,
    LowerBound,
    Asymptote,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UpperBound => "upper_bound",
            Self::NumericMin => "numeric_min",
            Self::LowerBound => "lower_bound",
            Self::Asymptote => "asymptote",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub a: f64,
    pub value: f64,
    pub kind: PointKind,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
}
