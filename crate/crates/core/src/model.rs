//! Declarative description of a heterogeneous agent population.
//!
//! A [`SystemConfig`] lists groups of identical agents `(alpha, sigma, count)`
//! together with the horizon, default level and Euler step. Validation expands
//! it into a [`PopulationLayout`]: per-agent coefficient arrays for the
//! simulator and a group-level [`Composition`] `(alpha_k, sigma_k, rho_k)` for
//! the analytics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_REPLICATIONS: usize = 10_000;

/// Tolerance on `sum(rho) == 1` for compositions given directly as fractions.
pub const RHO_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("population is empty: at least one group is required")]
    EmptyPopulation,
    #[error("group {group}: count must be at least 1")]
    ZeroCount { group: usize },
    #[error("group {group}: sigma must be positive (got {sigma})")]
    NonPositiveSigma { group: usize, sigma: f64 },
    #[error("group {group}: alpha must be non-negative (got {alpha})")]
    NegativeAlpha { group: usize, alpha: f64 },
    #[error("groups {first} and {second} share (alpha, sigma) = ({alpha}, {sigma}); merge them into one group")]
    DuplicateGroup {
        first: usize,
        second: usize,
        alpha: f64,
        sigma: f64,
    },
    #[error("{field} must be finite (got {value})")]
    NonFinite { field: &'static str, value: f64 },
    #[error("eta must be negative (got {0})")]
    NonNegativeEta(f64),
    #[error("horizon T must be positive (got {0})")]
    NonPositiveHorizon(f64),
    #[error("dt must be positive (got {0})")]
    NonPositiveDt(f64),
    #[error("dt = {dt} exceeds the horizon T = {horizon}")]
    DtExceedsHorizon { dt: f64, horizon: f64 },
    #[error("T / dt = {ratio} is not an integer number of steps")]
    NonIntegerSteps { ratio: f64 },
    #[error("stability guard violated: dt * max(alpha) = {product} must be below 1 (dt = {dt}, max alpha = {alpha_max})")]
    StabilityGuard {
        dt: f64,
        alpha_max: f64,
        product: f64,
    },
    #[error("replications must be at least 1")]
    ZeroReplications,
    #[error("invalid composition: {0}")]
    InvalidComposition(String),
    #[error("expansion undefined: weighted mean alpha is {0}, must be positive")]
    UndefinedExpansion(f64),
}

/// One homogeneous sub-population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    /// Mean-reversion rate towards the empirical mean (1/time).
    pub alpha: f64,
    /// Volatility (state units per sqrt(time)).
    pub sigma: f64,
    pub count: usize,
}

impl GroupSpec {
    pub fn new(alpha: f64, sigma: f64, count: usize) -> Self {
        Self {
            alpha,
            sigma,
            count,
        }
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

/// Full experiment description. Serializes to the JSON config schema
/// `{"groups":[...], "T", "dt", "eta", "y0", "seed", "replications"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub groups: Vec<GroupSpec>,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Default level, strictly negative.
    pub eta: f64,
    #[serde(default)]
    pub y0: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

impl SystemConfig {
    /// Config with the documented defaults: `dt = 1e-3`, `y0 = 0`, `seed = 0`,
    /// `replications = 10^4`.
    pub fn new(groups: Vec<GroupSpec>, horizon: f64, eta: f64) -> Self {
        Self {
            groups,
            horizon,
            dt: DEFAULT_DT,
            eta,
            y0: 0.0,
            seed: 0,
            replications: DEFAULT_REPLICATIONS,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn max_alpha(&self) -> f64 {
        self.groups.iter().map(|g| g.alpha).fold(0.0, f64::max)
    }

    /// Checks every config invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.groups.is_empty() {
            return Err(ModelError::EmptyPopulation);
        }
        for (k, g) in self.groups.iter().enumerate() {
            finite("alpha", g.alpha)?;
            finite("sigma", g.sigma)?;
            if g.count == 0 {
                return Err(ModelError::ZeroCount { group: k });
            }
            if g.sigma <= 0.0 {
                return Err(ModelError::NonPositiveSigma {
                    group: k,
                    sigma: g.sigma,
                });
            }
            if g.alpha < 0.0 {
                return Err(ModelError::NegativeAlpha {
                    group: k,
                    alpha: g.alpha,
                });
            }
        }
        for (i, a) in self.groups.iter().enumerate() {
            for (j, b) in self.groups.iter().enumerate().skip(i + 1) {
                if a.alpha == b.alpha && a.sigma == b.sigma {
                    return Err(ModelError::DuplicateGroup {
                        first: i,
                        second: j,
                        alpha: a.alpha,
                        sigma: a.sigma,
                    });
                }
            }
        }
        finite("T", self.horizon)?;
        finite("dt", self.dt)?;
        finite("eta", self.eta)?;
        finite("y0", self.y0)?;
        if self.eta >= 0.0 {
            return Err(ModelError::NonNegativeEta(self.eta));
        }
        step_count(self.horizon, self.dt)?;
        let alpha_max = self.max_alpha();
        let product = self.dt * alpha_max;
        if product >= 1.0 {
            return Err(ModelError::StabilityGuard {
                dt: self.dt,
                alpha_max,
                product,
            });
        }
        if self.replications == 0 {
            return Err(ModelError::ZeroReplications);
        }
        Ok(())
    }

    /// Same groups with every count multiplied by `factor`.
    pub fn with_counts_scaled(&self, factor: usize) -> Self {
        let mut scaled = self.clone();
        for g in &mut scaled.groups {
            g.count *= factor;
        }
        scaled
    }
}

fn finite(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFinite { field, value })
    }
}

/// Number of Euler steps covering `[0, horizon]`; `horizon / dt` must be an
/// integer up to rounding.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize, ModelError> {
    if horizon <= 0.0 {
        return Err(ModelError::NonPositiveHorizon(horizon));
    }
    if dt <= 0.0 {
        return Err(ModelError::NonPositiveDt(dt));
    }
    if dt > horizon {
        return Err(ModelError::DtExceedsHorizon { dt, horizon });
    }
    let ratio = horizon / dt;
    let n = ratio.round();
    // A couple of ulps absorbs the rounding in e.g. 1.0 / 1e-3.
    if (ratio - n).abs() > 2.0 * f64::EPSILON * n {
        return Err(ModelError::NonIntegerSteps { ratio });
    }
    Ok(n as usize)
}

/// Group-level parameters `(alpha_k, sigma_k, rho_k)`; everything the
/// variance analytics depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    alpha: Vec<f64>,
    sigma: Vec<f64>,
    rho: Vec<f64>,
}

impl Composition {
    /// Builds a composition from explicit fractions. `rho` must be positive
    /// and sum to one within [`RHO_SUM_TOL`].
    pub fn new(alpha: Vec<f64>, sigma: Vec<f64>, rho: Vec<f64>) -> Result<Self, ModelError> {
        let k = alpha.len();
        if k == 0 {
            return Err(ModelError::EmptyPopulation);
        }
        if sigma.len() != k || rho.len() != k {
            return Err(ModelError::InvalidComposition(format!(
                "length mismatch: {} alpha, {} sigma, {} rho",
                k,
                sigma.len(),
                rho.len()
            )));
        }
        for g in 0..k {
            finite("alpha", alpha[g])?;
            finite("sigma", sigma[g])?;
            finite("rho", rho[g])?;
            if alpha[g] < 0.0 {
                return Err(ModelError::NegativeAlpha {
                    group: g,
                    alpha: alpha[g],
                });
            }
            if sigma[g] <= 0.0 {
                return Err(ModelError::NonPositiveSigma {
                    group: g,
                    sigma: sigma[g],
                });
            }
            if rho[g] <= 0.0 {
                return Err(ModelError::InvalidComposition(format!(
                    "rho[{g}] = {} must be positive",
                    rho[g]
                )));
            }
        }
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > RHO_SUM_TOL {
            return Err(ModelError::InvalidComposition(format!(
                "rho sums to {total}, expected 1"
            )));
        }
        Ok(Self { alpha, sigma, rho })
    }

    pub fn n_groups(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// `sum rho_k alpha_k`
    pub fn alpha_bar(&self) -> f64 {
        self.rho.iter().zip(&self.alpha).map(|(r, a)| r * a).sum()
    }

    /// `sum rho_k sigma_k^2`, the effective squared volatility.
    pub fn effective_sigma_sq(&self) -> f64 {
        self.rho
            .iter()
            .zip(&self.sigma)
            .map(|(r, s)| r * s * s)
            .sum()
    }

    pub fn has_common_alpha(&self) -> bool {
        self.alpha.iter().all(|&a| a == self.alpha[0])
    }
}

/// Validated, expanded population: agents of the same group are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationLayout {
    alpha: Vec<f64>,
    sigma: Vec<f64>,
    group: Vec<usize>,
    counts: Vec<usize>,
    composition: Composition,
}

impl PopulationLayout {
    pub fn n_agents(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_groups(&self) -> usize {
        self.counts.len()
    }

    /// Per-agent mean-reversion rates.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Per-agent volatilities.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Group index of each agent.
    pub fn group_of(&self) -> &[usize] {
        &self.group
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn rho(&self) -> &[f64] {
        self.composition.rho()
    }

    pub fn composition(&self) -> &Composition {
        &self.composition
    }
}

/// Re-checks every [`SystemConfig`] invariant and expands groups into
/// per-agent arrays in group order.
pub fn validate_and_expand(config: &SystemConfig) -> Result<PopulationLayout, ModelError> {
    config.validate()?;
    let n = config.n_agents();
    let mut alpha = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    let mut group = Vec::with_capacity(n);
    for (k, g) in config.groups.iter().enumerate() {
        alpha.extend(std::iter::repeat_n(g.alpha, g.count));
        sigma.extend(std::iter::repeat_n(g.sigma, g.count));
        group.extend(std::iter::repeat_n(k, g.count));
    }
    let counts: Vec<usize> = config.groups.iter().map(|g| g.count).collect();
    let rho = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let composition = Composition {
        alpha: config.groups.iter().map(|g| g.alpha).collect(),
        sigma: config.groups.iter().map(|g| g.sigma).collect(),
        rho,
    };
    Ok(PopulationLayout {
        alpha,
        sigma,
        group,
        counts,
        composition,
    })
}

/// Weighted mean rate and relative deviations `eps_k = alpha_k / alpha_bar - 1`
/// of a population around its homogeneous point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoefficients {
    pub alpha_bar: f64,
    pub eps: Vec<f64>,
}

impl ExpansionCoefficients {
    /// `sum rho_k eps_k`; zero up to rounding by construction.
    pub fn weighted_sum(&self, rho: &[f64]) -> f64 {
        rho.iter().zip(&self.eps).map(|(r, e)| r * e).sum()
    }
}

pub fn expansion_coefficients(
    composition: &Composition,
) -> Result<ExpansionCoefficients, ModelError> {
    let alpha_bar = composition.alpha_bar();
    if alpha_bar <= 0.0 {
        return Err(ModelError::UndefinedExpansion(alpha_bar));
    }
    let eps = composition
        .alpha()
        .iter()
        .map(|a| a / alpha_bar - 1.0)
        .collect();
    Ok(ExpansionCoefficients { alpha_bar, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn group_a() -> SystemConfig {
        SystemConfig::new(
            vec![
                GroupSpec::new(1.0, 2.0, 2),
                GroupSpec::new(10.0, 1.0, 5),
                GroupSpec::new(100.0, 0.5, 3),
            ],
            1.0,
            -0.7,
        )
    }

    #[test]
    fn group_a_expands_to_ten_agents() {
        let layout = validate_and_expand(&group_a()).unwrap();
        assert_eq!(layout.n_agents(), 10);
        assert_eq!(layout.n_groups(), 3);
        assert_eq!(layout.rho(), &[0.2, 0.5, 0.3]);
        assert_eq!(&layout.alpha()[..3], &[1.0, 1.0, 10.0]);
        assert_eq!(layout.group_of(), &[0, 0, 1, 1, 1, 1, 1, 2, 2, 2]);
        let total: f64 = layout.rho().iter().sum();
        assert!((total - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn single_agent() {
        let cfg = SystemConfig::new(vec![GroupSpec::new(0.0, 1.0, 1)], 1.0, -0.7);
        let layout = validate_and_expand(&cfg).unwrap();
        assert_eq!(layout.n_agents(), 1);
        assert_eq!(layout.rho(), &[1.0]);
    }

    #[test]
    fn rejections_have_distinct_diagnostics() {
        let mut dup = group_a();
        dup.groups = vec![GroupSpec::new(10.0, 1.0, 5), GroupSpec::new(10.0, 1.0, 5)];
        let mut sigma = group_a();
        sigma.groups[1].sigma = 0.0;
        let mut eta = group_a();
        eta.eta = 0.7;
        let mut stiff = group_a();
        stiff.dt = 0.01;
        let mut empty = group_a();
        empty.groups.clear();

        let errors = [
            validate_and_expand(&dup).unwrap_err(),
            validate_and_expand(&sigma).unwrap_err(),
            validate_and_expand(&eta).unwrap_err(),
            validate_and_expand(&stiff).unwrap_err(),
            validate_and_expand(&empty).unwrap_err(),
        ];
        assert!(matches!(
            errors[0],
            ModelError::DuplicateGroup {
                first: 0,
                second: 1,
                ..
            }
        ));
        assert!(matches!(
            errors[1],
            ModelError::NonPositiveSigma { group: 1, .. }
        ));
        assert_eq!(errors[2], ModelError::NonNegativeEta(0.7));
        assert!(errors[2].to_string().contains("eta must be negative"));
        assert!(matches!(errors[3], ModelError::StabilityGuard { .. }));
        assert_eq!(errors[4], ModelError::EmptyPopulation);
        let messages: std::collections::HashSet<String> =
            errors.iter().map(|e| e.to_string()).collect();
        assert_eq!(messages.len(), errors.len());
    }

    #[test]
    fn step_count_accepts_rounded_ratios() {
        assert_eq!(step_count(1.0, 1e-3).unwrap(), 1000);
        assert_eq!(step_count(0.3, 0.1).unwrap(), 3);
        assert!(matches!(
            step_count(1.0, 0.3),
            Err(ModelError::NonIntegerSteps { .. })
        ));
        assert!(matches!(
            step_count(1.0, 2.0),
            Err(ModelError::DtExceedsHorizon { .. })
        ));
    }

    #[test]
    fn expansion_coefficients_of_vhat_rows() {
        for alpha in [[9.4, 10.0, 10.4], [47.0, 50.0, 52.0]] {
            let comp =
                Composition::new(alpha.to_vec(), vec![5.0, 2.0, 1.0], vec![0.2, 0.5, 0.3]).unwrap();
            let coeffs = expansion_coefficients(&comp).unwrap();
            assert_abs_diff_eq!(coeffs.alpha_bar, alpha[1], epsilon = 1e-12);
            for (e, want) in coeffs.eps.iter().zip([-0.06, 0.0, 0.04]) {
                assert_abs_diff_eq!(*e, want, epsilon = 1e-12);
            }
            assert!(coeffs.weighted_sum(comp.rho()).abs() <= 1e-12);
        }
    }

    #[test]
    fn homogeneous_expansion_is_zero() {
        let comp =
            Composition::new(vec![3.0; 3], vec![1.0, 2.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        let coeffs = expansion_coefficients(&comp).unwrap();
        assert_abs_diff_eq!(coeffs.alpha_bar, 3.0, epsilon = 1e-15);
        assert!(coeffs.eps.iter().all(|e| e.abs() < 1e-15));
    }

    #[test]
    fn all_zero_alpha_has_no_expansion() {
        let comp = Composition::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(
            expansion_coefficients(&comp),
            Err(ModelError::UndefinedExpansion(0.0))
        );
    }

    #[test]
    fn config_json_defaults() {
        let cfg: SystemConfig = serde_json::from_str(
            r#"{"groups":[{"alpha":1,"sigma":2,"count":3}],"T":1,"eta":-0.7}"#,
        )
        .unwrap();
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.y0, 0.0);
        assert_eq!(cfg.replications, 10_000);
        cfg.validate().unwrap();
    }
}
