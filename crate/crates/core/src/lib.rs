//! Simulation and analysis of heterogeneous mean-field systemic-risk models.
//!
//! Agents follow `dY^i = alpha_i (Ybar - Y^i) dt + sigma_i dW^i` and default
//! when their state reaches a negative level `eta`. The crate provides
//! Euler–Maruyama simulation, Monte Carlo estimates of default statistics and
//! the large-population variance functional `V_T^2` behind the systemic tail
//! `P(min Ybar <= eta) ~ exp(-N eta^2 / (2 V_T^2))`.

pub mod analytics;
pub mod model;
pub mod montecarlo;
pub mod report;
pub mod rng;
pub mod sde;

pub use model::{
    validate_and_expand, Composition, GroupSpec, ModelError, PopulationLayout, SystemConfig,
};
pub use montecarlo::{MonteCarlo, MonteCarloError};
