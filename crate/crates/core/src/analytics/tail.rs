//! Tail probabilities of the systemic event `min_t Ybar_t <= eta`.

use std::f64::consts::SQRT_2;

use super::AnalyticsError;

/// `Phi(x)` via the complementary error function; relative accuracy near
/// machine precision in both tails.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn check_level(eta: f64) -> Result<(), AnalyticsError> {
    if eta < 0.0 {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidInput(format!(
            "default level must be negative, got {eta}"
        )))
    }
}

/// Reflection-principle probability `2 Phi(eta sqrt(N) / V_T)` for a mean that
/// behaves like a Brownian motion with terminal variance `V_T^2 / N`.
/// `v_t = 0` means a deterministic mean, which never reaches `eta < 0`.
pub fn gaussian_tail_exact(v_t: f64, n_agents: usize, eta: f64) -> Result<f64, AnalyticsError> {
    check_level(eta)?;
    if n_agents == 0 {
        return Err(AnalyticsError::InvalidInput("N must be at least 1".into()));
    }
    if !(v_t >= 0.0 && v_t.is_finite()) {
        return Err(AnalyticsError::InvalidInput(format!(
            "V_T must be finite and non-negative, got {v_t}"
        )));
    }
    if v_t == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * standard_normal_cdf(eta * (n_agents as f64).sqrt() / v_t))
}

/// Large-deviation approximation `2 exp(-eta^2 N / (2 V_T^2))` and its rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceApprox {
    /// Unclamped; may exceed 1 because of the prefactor 2.
    pub probability_raw: f64,
    /// `eta^2 / (2 V_T^2)`
    pub rate: f64,
}

impl LaplaceApprox {
    pub fn probability_clamped(&self) -> f64 {
        self.probability_raw.min(1.0)
    }
}

pub fn laplace_tail_approx(
    v2: f64,
    n_agents: usize,
    eta: f64,
) -> Result<LaplaceApprox, AnalyticsError> {
    if !(v2 > 0.0 && v2.is_finite()) {
        return Err(AnalyticsError::InvalidInput(format!(
            "V_T^2 must be positive, got {v2}"
        )));
    }
    let rate = eta * eta / (2.0 * v2);
    Ok(LaplaceApprox {
        probability_raw: 2.0 * (-rate * n_agents as f64).exp(),
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        // mpmath.ncdf at 30 digits
        assert!((2.0 * standard_normal_cdf(-0.7) - 0.483_927_304_446_146_07).abs() < 1e-14);
        assert!((standard_normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let tail = standard_normal_cdf(-10.0);
        assert!((tail / 7.619_853_024_160_526e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_agent_unit_variance() {
        let p = gaussian_tail_exact(1.0, 1, -0.7).unwrap();
        assert!((p - 0.483_927_304_446_146_07).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_substitution() {
        // V_T^2 = T sigma^2 with sigma = 1, T = 1, N = 10
        let p = gaussian_tail_exact(1.0, 10, -0.7).unwrap();
        assert!((p - 0.026_856_695_507_524_397).abs() < 1e-14);
        let direct = 2.0 * standard_normal_cdf(10.0 * -0.7 / (1.0f64 * 10.0f64.sqrt()));
        assert!((p - direct).abs() < 1e-15);
    }

    #[test]
    fn boundary_behaviour() {
        assert!(gaussian_tail_exact(1e12, 1, -1e-9).unwrap() > 1.0 - 1e-12);
        assert_eq!(gaussian_tail_exact(0.0, 5, -0.7).unwrap(), 0.0);
        assert!(gaussian_tail_exact(1.0, 5, 0.1).is_err());
        assert!(gaussian_tail_exact(1.0, 0, -0.1).is_err());
    }

    #[test]
    fn laplace_example() {
        let l = laplace_tail_approx(7.3, 10, -0.7).unwrap();
        assert!((l.rate - 0.49 / 14.6).abs() < 1e-16);
        assert!((l.probability_raw - 1.429_794_520_806_956).abs() < 1e-12);
        assert_eq!(l.probability_clamped(), 1.0);
        assert!(laplace_tail_approx(0.0, 10, -0.7).is_err());
    }

    #[test]
    fn laplace_rate_is_log_limit() {
        let rate = 0.2;
        let v2 = 0.49 / (2.0 * rate);
        let mut last_gap = f64::INFINITY;
        for n in [10, 100, 1000] {
            let p = laplace_tail_approx(v2, n, -0.7).unwrap().probability_raw;
            let gap = (-(p.ln()) / n as f64 - rate).abs();
            assert!(gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-3);
    }
}
