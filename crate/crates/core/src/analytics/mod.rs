//! Closed-form and numerical mathematics of the mean-field system: the group
//! generator `M`, its exponential, the variance functional `V_T^2` by several
//! routes, tail-probability formulas and the flocking bound.

mod expm;
mod flocking;
mod generator;
mod quadrature;
mod tail;
mod variance;

use thiserror::Error;

use crate::model::ModelError;

pub use expm::matrix_exponential;
pub use flocking::{flocking_bound, FlockingBound};
pub use generator::{build_generator, GeneratorTriple};
pub use quadrature::{
    gauss_legendre_rule, integrate_adaptive, QuadratureOptions, QuadratureResult,
};
pub use tail::{gaussian_tail_exact, laplace_tail_approx, standard_normal_cdf, LaplaceApprox};
pub use variance::{
    variance_closed_form_k2, variance_delta_expansion, variance_expansion_eps,
    variance_homogeneous, variance_integrand, variance_quadrature, variance_report, VarianceReport,
    DEFAULT_QUADRATURE_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("{method} is not applicable: {reason}")]
    NotApplicable {
        method: &'static str,
        reason: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix exponential overflowed (1-norm of A*t = {norm})")]
    Overflow { norm: f64 },
    #[error("quadrature did not converge: {panels} panels, error estimate {estimate:e} > tol {tol:e}; worst panel [{worst_lo}, {worst_hi}] with error {worst_err:e}")]
    NonConvergence {
        panels: usize,
        estimate: f64,
        tol: f64,
        worst_lo: f64,
        worst_hi: f64,
        worst_err: f64,
    },
    #[error("variance integrand is {value} at s = {s}; expected a positive value")]
    NonPositiveIntegrand { s: f64, value: f64 },
    #[error("agent index {agent} out of range for {n_agents} agents")]
    AgentOutOfRange { agent: usize, n_agents: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}
