//! Euler–Maruyama integration of the mean-field system
//!
//! ```text
//! Y^i_{m+1} = Y^i_m + alpha_i (Ybar_m - Y^i_m) dt + sigma_i sqrt(dt) Z^i_m
//! ```
//!
//! The agents interact only through the empirical mean, so a step costs O(N):
//! the mean is recomputed once per step from the updated states.

use std::io::{self, Write};

use thiserror::Error;

use crate::model::{step_count, ModelError, PopulationLayout, SystemConfig};
use crate::report::fmt_f64;
use crate::rng::{agent_streams, GaussianStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("numerical blow-up in replication {replication}: agent {agent} became {value} at step {step}")]
    NumericalBlowup {
        replication: u64,
        step: usize,
        agent: usize,
        value: f64,
    },
    #[error("agent index {agent} out of range for {n_agents} agents")]
    AgentOutOfRange { agent: usize, n_agents: usize },
    #[error("expected {expected} noise streams, got {got}")]
    StreamCount { expected: usize, got: usize },
}

/// Uniform grid `t_m = m dt`, `m = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self, ModelError> {
        let n_steps = step_count(horizon, dt)?;
        Ok(Self { n_steps, dt })
    }

    pub fn from_config(config: &SystemConfig) -> Result<Self, ModelError> {
        Self::new(config.horizon, config.dt)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }
}

/// Receives the state after every grid point, including `t_0`.
pub trait PathObserver {
    fn observe(&mut self, step: usize, state: &[f64], mean: f64);
}

fn mean_of(state: &[f64]) -> f64 {
    state.iter().sum::<f64>() / state.len() as f64
}

/// Core recursion. `streams[i]` supplies agent `i`'s standard normals.
pub fn simulate_with_streams<O: PathObserver>(
    layout: &PopulationLayout,
    grid: &TimeGrid,
    y0: f64,
    streams: &mut [GaussianStream],
    replication: u64,
    observer: &mut O,
) -> Result<(), SimulationError> {
    let n = layout.n_agents();
    if streams.len() != n {
        return Err(SimulationError::StreamCount {
            expected: n,
            got: streams.len(),
        });
    }
    let alpha = layout.alpha();
    let sigma = layout.sigma();
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();

    let mut state = vec![y0; n];
    let mut mean = mean_of(&state);
    observer.observe(0, &state, mean);

    for step in 1..=grid.n_steps() {
        for (i, y) in state.iter_mut().enumerate() {
            let z = streams[i].next_normal();
            let next = *y + alpha[i] * (mean - *y) * dt + sigma[i] * sqrt_dt * z;
            if !next.is_finite() {
                return Err(SimulationError::NumericalBlowup {
                    replication,
                    step,
                    agent: i,
                    value: next,
                });
            }
            *y = next;
        }
        mean = mean_of(&state);
        observer.observe(step, &state, mean);
    }
    Ok(())
}

/// All paths of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    /// `paths[i][m]`: agent `i` at grid point `m`.
    pub paths: Vec<Vec<f64>>,
    pub mean_path: Vec<f64>,
    pub times: Vec<f64>,
    pub replication: u64,
    pub seed: u64,
}

impl TrajectorySet {
    pub fn n_agents(&self) -> usize {
        self.paths.len()
    }

    /// CSV with header `t,agent_0,...,agent_{N-1},mean`, one row per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for i in 0..self.n_agents() {
            write!(out, ",agent_{i}")?;
        }
        writeln!(out, ",mean")?;
        for (m, t) in self.times.iter().enumerate() {
            write!(out, "{}", fmt_f64(*t))?;
            for path in &self.paths {
                write!(out, ",{}", fmt_f64(path[m]))?;
            }
            writeln!(out, ",{}", fmt_f64(self.mean_path[m]))?;
        }
        Ok(())
    }
}

struct Recorder {
    paths: Vec<Vec<f64>>,
    mean_path: Vec<f64>,
}

impl PathObserver for Recorder {
    fn observe(&mut self, _step: usize, state: &[f64], mean: f64) {
        for (path, y) in self.paths.iter_mut().zip(state) {
            path.push(*y);
        }
        self.mean_path.push(mean);
    }
}

/// Simulates one replication and keeps every path.
pub fn simulate_replication(
    layout: &PopulationLayout,
    grid: &TimeGrid,
    y0: f64,
    seed: u64,
    replication: u64,
) -> Result<TrajectorySet, SimulationError> {
    let n = layout.n_agents();
    let len = grid.n_steps() + 1;
    let mut recorder = Recorder {
        paths: vec![Vec::with_capacity(len); n],
        mean_path: Vec::with_capacity(len),
    };
    let mut streams = agent_streams(seed, replication, n);
    simulate_with_streams(layout, grid, y0, &mut streams, replication, &mut recorder)?;
    Ok(TrajectorySet {
        paths: recorder.paths,
        mean_path: recorder.mean_path,
        times: (0..len).map(|m| grid.time(m)).collect(),
        replication,
        seed,
    })
}

/// Running extrema of one replication; enough for defaults and flocking
/// statistics without storing paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub agent_min: Vec<f64>,
    pub mean_min: f64,
    /// `max_m |Y^i_m - Ybar_m|` per agent.
    pub max_deviation: Vec<f64>,
}

impl ReplicationSummary {
    fn new(n: usize) -> Self {
        Self {
            agent_min: vec![f64::INFINITY; n],
            mean_min: f64::INFINITY,
            max_deviation: vec![0.0; n],
        }
    }

    pub fn defaults(&self, eta: f64) -> DefaultRecord {
        let flags: Vec<bool> = self.agent_min.iter().map(|&m| m <= eta).collect();
        DefaultRecord::new(flags, self.mean_min <= eta)
    }
}

impl PathObserver for ReplicationSummary {
    fn observe(&mut self, _step: usize, state: &[f64], mean: f64) {
        self.mean_min = self.mean_min.min(mean);
        for (i, &y) in state.iter().enumerate() {
            self.agent_min[i] = self.agent_min[i].min(y);
            self.max_deviation[i] = self.max_deviation[i].max((y - mean).abs());
        }
    }
}

/// Simulates one replication keeping only running extrema.
pub fn simulate_summary(
    layout: &PopulationLayout,
    grid: &TimeGrid,
    y0: f64,
    seed: u64,
    replication: u64,
) -> Result<ReplicationSummary, SimulationError> {
    let n = layout.n_agents();
    let mut summary = ReplicationSummary::new(n);
    let mut streams = agent_streams(seed, replication, n);
    simulate_with_streams(layout, grid, y0, &mut streams, replication, &mut summary)?;
    Ok(summary)
}

/// Which agents (and whether the mean) touched the default level on the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefaultRecord {
    pub flags: Vec<bool>,
    pub defaulted_count: usize,
    /// The empirical mean reached the default level (the systemic event).
    pub systemic: bool,
}

impl DefaultRecord {
    fn new(flags: Vec<bool>, systemic: bool) -> Self {
        let defaulted_count = flags.iter().filter(|&&f| f).count();
        Self {
            flags,
            defaulted_count,
            systemic,
        }
    }
}

/// Grid-minimum default detection; no Brownian-bridge correction.
pub fn detect_defaults(traj: &TrajectorySet, eta: f64) -> DefaultRecord {
    let below = |path: &[f64]| path.iter().any(|&y| y <= eta);
    let flags = traj.paths.iter().map(|p| below(p)).collect();
    DefaultRecord::new(flags, below(&traj.mean_path))
}

/// `max_m |paths[agent][m] - mean_path[m]|`
pub fn max_deviation(traj: &TrajectorySet, agent: usize) -> Result<f64, SimulationError> {
    let path = traj
        .paths
        .get(agent)
        .ok_or(SimulationError::AgentOutOfRange {
            agent,
            n_agents: traj.n_agents(),
        })?;
    Ok(path
        .iter()
        .zip(&traj.mean_path)
        .map(|(y, m)| (y - m).abs())
        .fold(0.0, f64::max))
}
