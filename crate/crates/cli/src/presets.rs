//! Built-in experiment configurations.

use clap::ValueEnum;
use meanfield_core::{GroupSpec, SystemConfig};

pub const ETA: f64 = -0.7;
pub const HORIZON: f64 = 1.0;
pub const DT: f64 = 1e-3;
pub const REPLICATIONS: usize = 10_000;
pub const SEED: u64 = 0;

/// `(alpha, sigma)` of the three groups.
pub const GROUP_A: [(f64, f64); 3] = [(1.0, 2.0), (10.0, 1.0), (100.0, 0.5)];
pub const GROUP_B: [(f64, f64); 3] = [(1.0, 0.5), (10.0, 1.0), (100.0, 2.0)];

/// Group sizes of the loss-distribution tables, ten agents each.
pub const TABLE_RATIOS: [[usize; 3]; 6] = [
    [8, 1, 1],
    [1, 8, 1],
    [1, 1, 8],
    [5, 3, 2],
    [2, 5, 3],
    [2, 3, 5],
];

pub const DEFAULT_RATIO: [usize; 3] = [2, 5, 3];

/// Perturbation `alpha_k = alpha_bar (1 + delta c_k)` around a common rate.
pub const VHAT_DIRECTION: [f64; 3] = [-60.0, 0.0, 40.0];
pub const VHAT_DELTA: f64 = 1e-3;
pub const VHAT_SIGMA: [f64; 3] = [5.0, 2.0, 1.0];
pub const VHAT_RHO: [f64; 3] = [0.2, 0.5, 0.3];
pub const VHAT_ALPHA_BARS: [f64; 3] = [10.0, 50.0, 100.0];

pub const CONVERGENCE_SIZES: [usize; 6] = [10, 20, 30, 40, 50, 60];

fn base_config(groups: Vec<GroupSpec>) -> SystemConfig {
    let mut cfg = SystemConfig::new(groups, HORIZON, ETA);
    cfg.dt = DT;
    cfg.replications = REPLICATIONS;
    cfg.seed = SEED;
    cfg
}

fn grouped(params: &[(f64, f64); 3], counts: [usize; 3]) -> SystemConfig {
    base_config(
        params
            .iter()
            .zip(counts)
            .map(|(&(alpha, sigma), count)| GroupSpec::new(alpha, sigma, count))
            .collect(),
    )
}

pub fn group_a(counts: [usize; 3]) -> SystemConfig {
    grouped(&GROUP_A, counts)
}

pub fn group_b(counts: [usize; 3]) -> SystemConfig {
    grouped(&GROUP_B, counts)
}

/// Ten-agent (2:5:3) population on the perturbed rates around `alpha_bar`.
pub fn vhat_config(alpha_bar: f64) -> SystemConfig {
    base_config(
        (0..3)
            .map(|k| {
                GroupSpec::new(
                    alpha_bar * (1.0 + VHAT_DELTA * VHAT_DIRECTION[k]),
                    VHAT_SIGMA[k],
                    DEFAULT_RATIO[k],
                )
            })
            .collect(),
    )
}

pub fn ratio_label(counts: &[usize]) -> String {
    counts
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    GroupA,
    GroupB,
    #[value(name = "table-1")]
    Table1,
    #[value(name = "table-2")]
    Table2,
    VhatTable,
    #[value(name = "convergence-a-811")]
    ConvergenceA811,
    #[value(name = "convergence-a-253")]
    ConvergenceA253,
    #[value(name = "convergence-vhat-10")]
    ConvergenceVhat10,
    #[value(name = "convergence-vhat-50")]
    ConvergenceVhat50,
    #[value(name = "convergence-vhat-100")]
    ConvergenceVhat100,
}

impl Preset {
    pub fn all() -> &'static [Preset] {
        Preset::value_variants()
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::GroupA => "group-a",
            Preset::GroupB => "group-b",
            Preset::Table1 => "table-1",
            Preset::Table2 => "table-2",
            Preset::VhatTable => "vhat-table",
            Preset::ConvergenceA811 => "convergence-a-811",
            Preset::ConvergenceA253 => "convergence-a-253",
            Preset::ConvergenceVhat10 => "convergence-vhat-10",
            Preset::ConvergenceVhat50 => "convergence-vhat-50",
            Preset::ConvergenceVhat100 => "convergence-vhat-100",
        }
    }

    /// Every population configuration the preset simulates.
    pub fn configs(self) -> Vec<SystemConfig> {
        match self {
            Preset::GroupA => vec![group_a(DEFAULT_RATIO)],
            Preset::GroupB => vec![group_b(DEFAULT_RATIO)],
            Preset::Table1 => TABLE_RATIOS.iter().map(|&r| group_a(r)).collect(),
            Preset::Table2 => TABLE_RATIOS.iter().map(|&r| group_b(r)).collect(),
            Preset::VhatTable => VHAT_ALPHA_BARS.iter().map(|&a| vhat_config(a)).collect(),
            Preset::ConvergenceA811 => vec![group_a([8, 1, 1])],
            Preset::ConvergenceA253 => vec![group_a([2, 5, 3])],
            Preset::ConvergenceVhat10 => vec![vhat_config(10.0)],
            Preset::ConvergenceVhat50 => vec![vhat_config(50.0)],
            Preset::ConvergenceVhat100 => vec![vhat_config(100.0)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for preset in Preset::value_variants() {
            for cfg in preset.configs() {
                cfg.validate().unwrap();
                assert_eq!(cfg.n_agents(), 10);
            }
        }
    }

    #[test]
    fn vhat_rates() {
        let cfg = vhat_config(10.0);
        let alphas: Vec<f64> = cfg.groups.iter().map(|g| g.alpha).collect();
        assert!((alphas[0] - 9.4).abs() < 1e-12);
        assert_eq!(alphas[1], 10.0);
        assert!((alphas[2] - 10.4).abs() < 1e-12);
    }

    #[test]
    fn preset_names() {
        for p in Preset::all() {
            assert_eq!(p.to_possible_value().unwrap().get_name(), p.name());
        }
        let names: Vec<&str> = Preset::all().iter().map(|p| p.name()).collect();
        assert_eq!(
            names,
            [
                "group-a",
                "group-b",
                "table-1",
                "table-2",
                "vhat-table",
                "convergence-a-811",
                "convergence-a-253",
                "convergence-vhat-10",
                "convergence-vhat-50",
                "convergence-vhat-100"
            ]
        );
    }
}
