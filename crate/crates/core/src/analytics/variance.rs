//! The variance functional
//!
//! ```text
//! V_T^2 = int_0^T rho' e^{Ms} R^{-1} (e^{Ms})' rho ds
//! ```
//!
//! so that the empirical mean at time `T` is `N(0, V_T^2 / N)`. Four routes:
//! adaptive quadrature (any K), the two-group closed form, the common-alpha
//! value `T sum rho_k sigma_k^2`, and the second-order expansion around the
//! common-alpha point.

use super::{
    build_generator, integrate_adaptive, matrix_exponential, AnalyticsError, GeneratorTriple,
    QuadratureOptions, QuadratureResult,
};
use crate::model::{expansion_coefficients, Composition, ExpansionCoefficients};

pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-10;
const MAX_QUADRATURE_TOL: f64 = 1e-4;

/// `g(s) = rho' e^{Ms} R^{-1} (e^{Ms})' rho`
pub fn variance_integrand(generator: &GeneratorTriple, s: f64) -> Result<f64, AnalyticsError> {
    let p = matrix_exponential(&generator.m, s)?;
    let k = generator.k();
    let mut g = 0.0;
    for col in 0..k {
        let v: f64 = (0..k).map(|row| generator.rho[row] * p[(row, col)]).sum();
        g += generator.rinv_diag[col] * v * v;
    }
    Ok(g)
}

fn check_horizon(horizon: f64) -> Result<(), AnalyticsError> {
    if horizon.is_finite() && horizon >= 0.0 {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidInput(format!(
            "horizon must be finite and non-negative, got {horizon}"
        )))
    }
}

pub fn variance_quadrature(
    composition: &Composition,
    horizon: f64,
    tol: f64,
) -> Result<QuadratureResult, AnalyticsError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(AnalyticsError::InvalidInput(format!(
            "quadrature needs a positive horizon, got {horizon}"
        )));
    }
    if !(tol > 0.0 && tol <= MAX_QUADRATURE_TOL) {
        return Err(AnalyticsError::InvalidInput(format!(
            "quadrature tolerance must lie in (0, {MAX_QUADRATURE_TOL:e}], got {tol:e}"
        )));
    }
    let generator = build_generator(composition);
    let opts = QuadratureOptions {
        tol,
        ..QuadratureOptions::default()
    };
    integrate_adaptive(
        |s| {
            let g = variance_integrand(&generator, s)?;
            if g > 0.0 {
                Ok(g)
            } else {
                Err(AnalyticsError::NonPositiveIntegrand { s, value: g })
            }
        },
        0.0,
        horizon,
        &opts,
    )
}

/// Closed form for two groups with `gamma = alpha_2 rho_1 + alpha_1 rho_2 > 0`.
pub fn variance_closed_form_k2(
    composition: &Composition,
    horizon: f64,
) -> Result<f64, AnalyticsError> {
    const METHOD: &str = "two-group closed form";
    check_horizon(horizon)?;
    if composition.n_groups() != 2 {
        return Err(AnalyticsError::NotApplicable {
            method: METHOD,
            reason: format!("needs exactly 2 groups, got {}", composition.n_groups()),
        });
    }
    let (a1, a2) = (composition.alpha()[0], composition.alpha()[1]);
    let (s1, s2) = (composition.sigma()[0], composition.sigma()[1]);
    let (r1, r2) = (composition.rho()[0], composition.rho()[1]);
    let gamma = a2 * r1 + a1 * r2;
    if gamma <= 0.0 {
        return Err(AnalyticsError::NotApplicable {
            method: METHOD,
            reason: "gamma = 0 (both alpha vanish); use quadrature".into(),
        });
    }
    let t = horizon;
    let diff = a1 - a2;
    let decay1 = -(-gamma * t).exp_m1();
    let decay2 = -(-2.0 * gamma * t).exp_m1();
    let first = s1 * s1 * r1 / (gamma * gamma)
        * (a2 * a2 * t
            + r2 * r2 * diff * diff / (2.0 * gamma) * decay2
            + 2.0 * a2 * r2 * diff / gamma * decay1);
    let second = s2 * s2 * r2 / (gamma * gamma)
        * (a1 * a1 * t
            + r1 * r1 * diff * diff / (2.0 * gamma) * decay2
            + 2.0 * a1 * r1 * (-diff) / gamma * decay1);
    Ok(first + second)
}

/// `T sum rho_k sigma_k^2`, exact when every group shares one alpha.
pub fn variance_homogeneous(
    composition: &Composition,
    horizon: f64,
) -> Result<f64, AnalyticsError> {
    check_horizon(horizon)?;
    if !composition.has_common_alpha() {
        return Err(AnalyticsError::NotApplicable {
            method: "common-alpha formula",
            reason: "groups have different alpha".into(),
        });
    }
    Ok(horizon * composition.effective_sigma_sq())
}

/// Second-order expansion in the relative rate deviations
/// `eps_k = alpha_k / alpha_bar - 1` (which must satisfy `sum rho_k eps_k = 0`).
pub fn variance_expansion_eps(
    alpha_bar: f64,
    eps: &[f64],
    sigma: &[f64],
    rho: &[f64],
    horizon: f64,
) -> Result<f64, AnalyticsError> {
    check_horizon(horizon)?;
    if !(alpha_bar > 0.0 && alpha_bar.is_finite()) {
        return Err(AnalyticsError::InvalidInput(format!(
            "expansion needs a positive mean rate, got {alpha_bar}"
        )));
    }
    if eps.len() != rho.len() || sigma.len() != rho.len() {
        return Err(AnalyticsError::InvalidInput(
            "eps, sigma and rho must have the same length".into(),
        ));
    }
    let t = horizon;
    let ab = alpha_bar;
    let e1 = (-ab * t).exp();
    let e2 = (-2.0 * ab * t).exp();

    let mut sum_s2 = 0.0;
    let mut sum_eps_s2 = 0.0;
    let mut sum_eps2_s2 = 0.0;
    let mut sum_eps2 = 0.0;
    for ((r, s), e) in rho.iter().zip(sigma).zip(eps) {
        let s2 = s * s;
        sum_s2 += r * s2;
        sum_eps_s2 += r * e * s2;
        sum_eps2_s2 += r * e * e * s2;
        sum_eps2 += r * e * e;
    }

    let first_order = 1.0 / ab - t - e1 / ab;
    let own_second =
        -11.0 / (2.0 * ab) + 3.0 * t + (6.0 + 2.0 * t * ab) / ab * e1 - e2 / (2.0 * ab);
    let cross_second = -2.0 / ab + t + 2.0 / ab * e1 + t * e1;

    Ok(
        t * sum_s2 + 2.0 * first_order * sum_eps_s2 + own_second * sum_eps2_s2
            - 2.0 * cross_second * sum_s2 * sum_eps2,
    )
}

pub fn variance_delta_expansion(
    coeffs: &ExpansionCoefficients,
    composition: &Composition,
    horizon: f64,
) -> Result<f64, AnalyticsError> {
    variance_expansion_eps(
        coeffs.alpha_bar,
        &coeffs.eps,
        composition.sigma(),
        composition.rho(),
        horizon,
    )
}

/// `V_T^2` by every applicable route.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub horizon: f64,
    pub quadrature: QuadratureResult,
    pub quadrature_tol: f64,
    /// Present iff K = 2 with gamma > 0.
    pub closed_form_k2: Option<f64>,
    /// Present iff every group shares one alpha.
    pub homogeneous: Option<f64>,
    /// Present iff the weighted mean alpha is positive.
    pub expansion: Option<f64>,
}

impl VarianceReport {
    pub fn v2_quadrature(&self) -> f64 {
        self.quadrature.value
    }
}

pub fn variance_report(
    composition: &Composition,
    horizon: f64,
    tol: f64,
) -> Result<VarianceReport, AnalyticsError> {
    let quadrature = variance_quadrature(composition, horizon, tol)?;
    let expansion = match expansion_coefficients(composition) {
        Ok(coeffs) => Some(variance_delta_expansion(&coeffs, composition, horizon)?),
        Err(_) => None,
    };
    Ok(VarianceReport {
        horizon,
        quadrature,
        quadrature_tol: tol,
        closed_form_k2: variance_closed_form_k2(composition, horizon).ok(),
        homogeneous: variance_homogeneous(composition, horizon).ok(),
        expansion,
    })
}
