//! Exponential bound on `P(sup_t |Y^i_t - Ybar_t| > delta)` for populations
//! sharing one mean-reversion rate.

use super::AnalyticsError;
use crate::model::PopulationLayout;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlockingBound {
    /// `sqrt((1 - 1/N)^2 sigma_i^2 + N^-2 sum_{j != i} sigma_j^2)`
    pub kappa: f64,
    /// `2 exp(-delta^2 / ((kappa^2 / alpha)(1 - e^{-2 alpha T})))`; can exceed 1.
    pub bound: f64,
    /// Flocking parameter `max_i kappa_i^2 / alpha`.
    pub flocking_parameter: f64,
}

impl FlockingBound {
    pub fn bound_clamped(&self) -> f64 {
        self.bound.min(1.0)
    }
}

fn kappa_sq(sigma: &[f64], agent: usize) -> f64 {
    let n = sigma.len() as f64;
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let own = sigma[agent] * sigma[agent];
    (1.0 - 1.0 / n).powi(2) * own + (total - own) / (n * n)
}

pub fn flocking_bound(
    layout: &PopulationLayout,
    agent: usize,
    delta: f64,
    horizon: f64,
) -> Result<FlockingBound, AnalyticsError> {
    let n = layout.n_agents();
    if agent >= n {
        return Err(AnalyticsError::AgentOutOfRange { agent, n_agents: n });
    }
    if !layout.composition().has_common_alpha() {
        return Err(AnalyticsError::NotApplicable {
            method: "flocking bound",
            reason: "only proved for a common alpha".into(),
        });
    }
    let alpha = layout.alpha()[0];
    if alpha <= 0.0 {
        return Err(AnalyticsError::NotApplicable {
            method: "flocking bound",
            reason: "alpha must be positive".into(),
        });
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(AnalyticsError::InvalidInput(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(AnalyticsError::InvalidInput(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let sigma = layout.sigma();
    let k2 = kappa_sq(sigma, agent);
    let spread = k2 / alpha * -(-2.0 * alpha * horizon).exp_m1();
    let bound = 2.0 * (-delta * delta / spread).exp();
    let flocking_parameter = (0..n).map(|i| kappa_sq(sigma, i)).fold(0.0, f64::max) / alpha;
    Ok(FlockingBound {
        kappa: k2.sqrt(),
        bound,
        flocking_parameter,
    })
}
