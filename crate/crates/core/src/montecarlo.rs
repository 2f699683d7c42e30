//! Ensemble estimates over independent replications.
//!
//! Replications run on a rayon pool. Each one is a pure function of
//! `(config, seed, replication index)` and contributes integer counts, and
//! counts merge by addition. Results are therefore bitwise identical for any
//! thread count or schedule.

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{
    laplace_tail_approx, variance_expansion_eps, variance_quadrature, AnalyticsError,
};
use crate::model::{
    expansion_coefficients, validate_and_expand, Composition, ModelError, PopulationLayout,
    SystemConfig,
};
use crate::sde::{simulate_summary, ReplicationSummary, SimulationError, TimeGrid};

pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("at least {min} replications required, got {reps}")]
    TooFewReplications { reps: usize, min: usize },
    #[error("replication {replication}: {source}")]
    Simulation {
        replication: u64,
        #[source]
        source: SimulationError,
    },
    #[error("N = {n} does not preserve the group ratio (ratio total {ratio_total}); admissible N: {admissible:?}")]
    NonDivisibleN {
        n: usize,
        ratio_total: usize,
        admissible: Vec<usize>,
    },
    #[error("invalid expansion direction: {0}")]
    InvalidDirection(String),
    #[error("delta must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Agent(#[from] SimulationError),
}

/// Short, stable identifier of a config (first 16 hex digits of SHA-256 of
/// its JSON form).
pub fn config_fingerprint(config: &SystemConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

trait Tally: Send + Sized {
    type Item;
    fn add(&mut self, item: Self::Item);
    fn merge(&mut self, other: Self);
}

struct DefaultTally {
    histogram: Vec<u64>,
    systemic: u64,
}

impl Tally for DefaultTally {
    type Item = (usize, bool);

    fn add(&mut self, (count, systemic): (usize, bool)) {
        self.histogram[count] += 1;
        self.systemic += u64::from(systemic);
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self.systemic += other.systemic;
    }
}

struct ExceedanceTally {
    thresholds: Vec<f64>,
    hits: Vec<u64>,
}

impl Tally for ExceedanceTally {
    type Item = f64;

    fn add(&mut self, deviation: f64) {
        for (hit, &delta) in self.hits.iter_mut().zip(&self.thresholds) {
            *hit += u64::from(deviation > delta);
        }
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
    }
}

type Partial<T> = Result<T, (u64, SimulationError)>;

fn combine<T: Tally>(a: Partial<T>, b: Partial<T>) -> Partial<T> {
    match (a, b) {
        (Ok(mut x), Ok(y)) => {
            x.merge(y);
            Ok(x)
        }
        // keep the lowest failing replication so the reported error is schedule-independent
        (Err(x), Err(y)) => Err(if x.0 <= y.0 { x } else { y }),
        (Err(e), Ok(_)) | (Ok(_), Err(e)) => Err(e),
    }
}

/// Monte Carlo driver owning a fixed-size thread pool.
pub struct MonteCarlo {
    pool: rayon::ThreadPool,
}

impl MonteCarlo {
    /// `threads = 0` uses the available parallelism.
    pub fn new(threads: usize) -> Result<Self, MonteCarloError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| MonteCarloError::ThreadPool(e.to_string()))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn run<T, M, F>(&self, reps: usize, make: M, per_replication: F) -> Result<T, MonteCarloError>
    where
        T: Tally,
        M: Fn() -> T + Sync,
        F: Fn(u64) -> Result<T::Item, SimulationError> + Sync,
    {
        if reps < MIN_REPLICATIONS {
            return Err(MonteCarloError::TooFewReplications {
                reps,
                min: MIN_REPLICATIONS,
            });
        }
        let outcome = self.pool.install(|| {
            (0..reps as u64)
                .into_par_iter()
                .fold(
                    || Ok(make()),
                    |acc: Partial<T>, rep| match (acc, per_replication(rep)) {
                        (Ok(mut t), Ok(item)) => {
                            t.add(item);
                            Ok(t)
                        }
                        (Ok(_), Err(e)) => Err((rep, e)),
                        (Err(prev), Ok(_)) => Err(prev),
                        (Err(prev), Err(e)) => Err(if prev.0 <= rep { prev } else { (rep, e) }),
                    },
                )
                .reduce(|| Ok(make()), combine)
        });
        outcome.map_err(|(replication, source)| MonteCarloError::Simulation {
            replication,
            source,
        })
    }

    fn summaries<'a>(
        config: &'a SystemConfig,
        seed: u64,
    ) -> Result<
        impl Fn(u64) -> Result<ReplicationSummary, SimulationError> + Sync + 'a,
        MonteCarloError,
    > {
        let layout = validate_and_expand(config)?;
        let grid = TimeGrid::from_config(config)?;
        Ok(move |rep| simulate_summary(&layout, &grid, config.y0, seed, rep))
    }

    fn default_tally(
        &self,
        config: &SystemConfig,
        reps: usize,
        seed: u64,
    ) -> Result<DefaultTally, MonteCarloError> {
        let n = config.n_agents();
        let sim = Self::summaries(config, seed)?;
        let eta = config.eta;
        self.run(
            reps,
            || DefaultTally {
                histogram: vec![0; n + 1],
                systemic: 0,
            },
            |rep| {
                let record = sim(rep)?.defaults(eta);
                Ok((record.defaulted_count, record.systemic))
            },
        )
    }

    /// Histogram of the number of defaulted agents.
    pub fn estimate_loss_distribution(
        &self,
        config: &SystemConfig,
        reps: usize,
        seed: u64,
    ) -> Result<LossDistribution, MonteCarloError> {
        let tally = self.default_tally(config, reps, seed)?;
        Ok(LossDistribution::from_counts(
            tally.histogram,
            config_fingerprint(config),
        ))
    }

    /// Probability that the empirical mean reaches the default level.
    pub fn estimate_systemic_event(
        &self,
        config: &SystemConfig,
        reps: usize,
        seed: u64,
    ) -> Result<EstimateWithError, MonteCarloError> {
        let tally = self.default_tally(config, reps, seed)?;
        Ok(EstimateWithError::from_hits(tally.systemic, reps as u64)
            .with_log_rate(config.n_agents()))
    }

    /// Frequencies of `max_t |Y^agent_t - Ybar_t| > delta` for each delta,
    /// all from one set of replications.
    pub fn estimate_flocking_exceedances(
        &self,
        config: &SystemConfig,
        agent: usize,
        deltas: &[f64],
        reps: usize,
        seed: u64,
    ) -> Result<Vec<EstimateWithError>, MonteCarloError> {
        let n = config.n_agents();
        if agent >= n {
            return Err(SimulationError::AgentOutOfRange { agent, n_agents: n }.into());
        }
        if let Some(&bad) = deltas.iter().find(|d| d.is_nan() || **d <= 0.0) {
            return Err(MonteCarloError::InvalidDelta(bad));
        }
        let sim = Self::summaries(config, seed)?;
        let tally = self.run(
            reps,
            || ExceedanceTally {
                thresholds: deltas.to_vec(),
                hits: vec![0; deltas.len()],
            },
            |rep| Ok(sim(rep)?.max_deviation[agent]),
        )?;
        Ok(tally
            .hits
            .into_iter()
            .map(|h| EstimateWithError::from_hits(h, reps as u64))
            .collect())
    }

    pub fn estimate_flocking_exceedance(
        &self,
        config: &SystemConfig,
        agent: usize,
        delta: f64,
        reps: usize,
        seed: u64,
    ) -> Result<EstimateWithError, MonteCarloError> {
        let mut v = self.estimate_flocking_exceedances(config, agent, &[delta], reps, seed)?;
        Ok(v.remove(0))
    }

    /// Systemic-event probability at each population size, compared with the
    /// large-deviation rate of the (N-independent) composition.
    pub fn convergence_study(
        &self,
        base: &SystemConfig,
        sizes: &[usize],
        reps: usize,
        seed: u64,
        asymptote: AsymptoteSource,
    ) -> Result<Vec<ConvergenceRow>, MonteCarloError> {
        let layout = validate_and_expand(base)?;
        let ratio = reduced_ratio(layout.counts());
        let ratio_total: usize = ratio.iter().sum();
        let largest = sizes.iter().copied().max().unwrap_or(0);
        for &n in sizes {
            if n == 0 || n % ratio_total != 0 {
                let upto = largest.max(5 * ratio_total);
                return Err(MonteCarloError::NonDivisibleN {
                    n,
                    ratio_total,
                    admissible: (1..=upto / ratio_total).map(|m| m * ratio_total).collect(),
                });
            }
        }
        let rate = asymptotic_rate(&layout, base, asymptote)?;
        sizes
            .iter()
            .map(|&n| {
                let mut cfg = base.clone();
                for (g, r) in cfg.groups.iter_mut().zip(&ratio) {
                    g.count = r * (n / ratio_total);
                }
                let est = self.estimate_systemic_event(&cfg, reps, seed)?;
                Ok(ConvergenceRow::new(n, est, rate))
            })
            .collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reduced_ratio(counts: &[usize]) -> Vec<usize> {
    let g = counts.iter().copied().fold(0, gcd);
    counts.iter().map(|c| c / g).collect()
}

/// Which `V_T^2` feeds the asymptotic rate `eta^2 / (2 V_T^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoteSource {
    Quadrature { tol_exponent: i32 },
    Expansion,
}

impl Default for AsymptoteSource {
    fn default() -> Self {
        AsymptoteSource::Quadrature { tol_exponent: -10 }
    }
}

fn asymptotic_rate(
    layout: &PopulationLayout,
    config: &SystemConfig,
    source: AsymptoteSource,
) -> Result<f64, MonteCarloError> {
    let comp = layout.composition();
    let v2 = match source {
        AsymptoteSource::Quadrature { tol_exponent } => {
            variance_quadrature(comp, config.horizon, 10f64.powi(tol_exponent))?.value
        }
        AsymptoteSource::Expansion => {
            let coeffs = expansion_coefficients(comp)?;
            variance_expansion_eps(
                coeffs.alpha_bar,
                &coeffs.eps,
                comp.sigma(),
                comp.rho(),
                config.horizon,
            )?
        }
    };
    Ok(laplace_tail_approx(v2, layout.n_agents(), config.eta)?.rate)
}

/// Loss distribution over the number of defaulted agents `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDistribution {
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
    /// Binomial standard errors `sqrt(p (1 - p) / M)`.
    pub stderr: Vec<f64>,
    /// Probability that every agent defaults.
    pub tail_default_probability: f64,
    pub replications: u64,
    pub fingerprint: String,
}

impl LossDistribution {
    fn from_counts(counts: Vec<u64>, fingerprint: String) -> Self {
        let reps: u64 = counts.iter().sum();
        let m = reps as f64;
        let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
        let stderr = probabilities
            .iter()
            .map(|p| (p * (1.0 - p) / m).sqrt())
            .collect();
        let tail_default_probability = *probabilities.last().expect("at least one bin");
        Self {
            counts,
            probabilities,
            stderr,
            tail_default_probability,
            replications: reps,
            fingerprint,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.counts.len() - 1
    }
}

/// A Monte Carlo proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: u64,
    pub replications: u64,
    /// `-(1/N) log estimate`, when the estimate is positive and N was given.
    pub log_rate: Option<f64>,
    /// Rule-of-three bound `3 / M`, reported when no replication hit.
    pub upper_bound: Option<f64>,
}

impl EstimateWithError {
    pub fn from_hits(hits: u64, replications: u64) -> Self {
        let m = replications as f64;
        let p = hits as f64 / m;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / m).sqrt(),
            hits,
            replications,
            log_rate: None,
            upper_bound: (hits == 0).then(|| 3.0 / m),
        }
    }

    pub fn with_log_rate(mut self, n_agents: usize) -> Self {
        self.log_rate = (self.hits > 0).then(|| -self.estimate.ln() / n_agents as f64);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n_agents: usize,
    pub estimate: EstimateWithError,
    /// `eta^2 / (2 V_T^2)`
    pub asymptote: f64,
    /// `|log_rate - asymptote|`
    pub abs_gap: Option<f64>,
    /// `abs_gap / asymptote`
    pub relative_gap: Option<f64>,
}

impl ConvergenceRow {
    fn new(n_agents: usize, estimate: EstimateWithError, asymptote: f64) -> Self {
        let abs_gap = estimate.log_rate.map(|r| (r - asymptote).abs());
        Self {
            n_agents,
            estimate,
            asymptote,
            abs_gap,
            relative_gap: abs_gap.map(|g| g / asymptote),
        }
    }

    pub fn log_rate(&self) -> Option<f64> {
        self.estimate.log_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionRow {
    pub delta: f64,
    pub v2_quadrature: f64,
    pub v2_expansion: f64,
    pub abs_error: f64,
}

/// Quadrature against the second-order expansion along `alpha_k =
/// alpha_bar (1 + delta c_k)` for each `delta`. `c` must satisfy
/// `sum rho_k c_k = 0`.
pub fn expansion_error_study(
    direction: &[f64],
    rho: &[f64],
    sigma: &[f64],
    alpha_bar: f64,
    horizon: f64,
    deltas: &[f64],
    tol: f64,
) -> Result<Vec<ExpansionRow>, MonteCarloError> {
    if direction.len() != rho.len() {
        return Err(MonteCarloError::InvalidDirection(format!(
            "{} directions for {} groups",
            direction.len(),
            rho.len()
        )));
    }
    let scale = direction.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let weighted: f64 = rho.iter().zip(direction).map(|(r, c)| r * c).sum();
    if weighted.abs() > 1e-12 * scale {
        return Err(MonteCarloError::InvalidDirection(format!(
            "sum rho_k c_k = {weighted:e}, must vanish"
        )));
    }
    deltas
        .iter()
        .map(|&delta| {
            if delta.is_nan() || delta < 0.0 || direction.iter().any(|c| delta * c.abs() >= 1.0) {
                return Err(MonteCarloError::InvalidDirection(format!(
                    "delta = {delta} must be non-negative with delta |c_k| < 1"
                )));
            }
            let eps: Vec<f64> = direction.iter().map(|c| delta * c).collect();
            let alpha = eps.iter().map(|e| alpha_bar * (1.0 + e)).collect();
            let comp = Composition::new(alpha, sigma.to_vec(), rho.to_vec())?;
            let quad = variance_quadrature(&comp, horizon, tol)?.value;
            let hat = variance_expansion_eps(alpha_bar, &eps, sigma, rho, horizon)?;
            Ok(ExpansionRow {
                delta,
                v2_quadrature: quad,
                v2_expansion: hat,
                abs_error: (quad - hat).abs(),
            })
        })
        .collect()
}
