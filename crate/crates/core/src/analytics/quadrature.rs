//! Adaptive composite Gauss–Legendre quadrature.
//!
//! Each panel carries two estimates: the rule on the whole panel and the sum
//! of the rule on its two halves. Their difference is the panel's error
//! estimate; the panel with the largest estimate is bisected until the sum of
//! estimates drops below the tolerance.

use std::f64::consts::PI;

use super::AnalyticsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Absolute tolerance on the summed error estimate.
    pub tol: f64,
    /// Gauss–Legendre points per rule application.
    pub order: usize,
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            order: 10,
            initial_panels: 4,
            max_panels: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
    pub evaluations: usize,
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
pub fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn_1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn_1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn apply<F>(&self, f: &mut F, lo: f64, hi: f64) -> Result<f64, AnalyticsError>
    where
        F: FnMut(f64) -> Result<f64, AnalyticsError>,
    {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x)?;
        }
        Ok(acc * half)
    }
}

struct Panel {
    lo: f64,
    hi: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl Panel {
    fn build<F>(
        rule: &Rule,
        f: &mut F,
        lo: f64,
        hi: f64,
        whole: f64,
    ) -> Result<Self, AnalyticsError>
    where
        F: FnMut(f64) -> Result<f64, AnalyticsError>,
    {
        let mid = 0.5 * (lo + hi);
        let left = rule.apply(f, lo, mid)?;
        let right = rule.apply(f, mid, hi)?;
        Ok(Self {
            lo,
            hi,
            left,
            right,
            err: (left + right - whole).abs(),
        })
    }
}

/// Integrates `f` over `[a, b]` to an absolute error estimate of `opts.tol`.
pub fn integrate_adaptive<F>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult, AnalyticsError>
where
    F: FnMut(f64) -> Result<f64, AnalyticsError>,
{
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(AnalyticsError::InvalidInput(format!(
            "integration bounds must be finite with a < b, got [{a}, {b}]"
        )));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.order == 0 || opts.initial_panels == 0 {
        return Err(AnalyticsError::InvalidInput(format!(
            "bad quadrature options {opts:?}"
        )));
    }
    let (nodes, weights) = gauss_legendre_rule(opts.order);
    let rule = Rule { nodes, weights };
    let per_panel = 2 * opts.order;

    let mut evaluations = 0;
    let mut panels = Vec::with_capacity(opts.initial_panels * 4);
    let width = (b - a) / opts.initial_panels as f64;
    for p in 0..opts.initial_panels {
        let lo = a + p as f64 * width;
        let hi = if p + 1 == opts.initial_panels {
            b
        } else {
            lo + width
        };
        let whole = rule.apply(&mut f, lo, hi)?;
        panels.push(Panel::build(&rule, &mut f, lo, hi, whole)?);
        evaluations += opts.order + per_panel;
    }

    loop {
        let estimate: f64 = panels.iter().map(|p| p.err).sum();
        let (worst, worst_err) = panels.iter().enumerate().map(|(i, p)| (i, p.err)).fold(
            (0, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
        if estimate <= opts.tol {
            return Ok(QuadratureResult {
                value: panels.iter().map(|p| p.left + p.right).sum(),
                error_estimate: estimate,
                panels: panels.len(),
                evaluations,
            });
        }
        let p = &panels[worst];
        let mid = 0.5 * (p.lo + p.hi);
        if panels.len() >= opts.max_panels || mid <= p.lo || mid >= p.hi {
            return Err(AnalyticsError::NonConvergence {
                panels: panels.len(),
                estimate,
                tol: opts.tol,
                worst_lo: p.lo,
                worst_hi: p.hi,
                worst_err,
            });
        }
        let (lo, hi, left, right) = (p.lo, p.hi, p.left, p.right);
        let first = Panel::build(&rule, &mut f, lo, mid, left)?;
        let second = Panel::build(&rule, &mut f, mid, hi, right)?;
        evaluations += 2 * per_panel;
        panels[worst] = first;
        panels.push(second);
    }
}
