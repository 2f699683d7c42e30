//! Command-line front end: config loading, subcommand dispatch and CSV output.

pub mod presets;

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use meanfield_core::analytics::{
    flocking_bound, variance_report, AnalyticsError, DEFAULT_QUADRATURE_TOL,
};
use meanfield_core::model::expansion_coefficients;
use meanfield_core::montecarlo::{expansion_error_study, AsymptoteSource, ExpansionRow};
use meanfield_core::report::{
    fmt_f64, write_convergence_csv, write_expansion_csv, write_flocking_csv, write_loss_csv,
    write_variance_csv,
};
use meanfield_core::sde::{detect_defaults, simulate_replication, SimulationError, TimeGrid};
use meanfield_core::{
    validate_and_expand, ModelError, MonteCarlo, MonteCarloError, PopulationLayout, SystemConfig,
};

use presets::Preset;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Overflow { .. }
            | AnalyticsError::NonConvergence { .. }
            | AnalyticsError::NonPositiveIntegrand { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::NumericalBlowup { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MonteCarloError> for CliError {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::Simulation { .. } => CliError::Numerical(e.to_string()),
            MonteCarloError::Analytics(inner) => inner.into(),
            MonteCarloError::Agent(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "meanfield",
    version,
    about = "Heterogeneous mean-field systemic risk experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Base seed; overrides the config value
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo replications; overrides the config value
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Directory for CSV outputs (created if missing)
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; 0 means all available cores
    #[arg(long, global = true, env = "MEANFIELD_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON system configuration
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Asymptote {
    Quadrature,
    Expansion,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the paths of one replication to trajectories.csv
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Replication index to simulate
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
    /// Estimate the distribution of the number of defaults (loss_hist.csv)
    LossDist {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Compute V_T^2 by every applicable method (variance.csv)
    Variance {
        #[command(flatten)]
        config: ConfigArg,
        /// Absolute quadrature tolerance
        #[arg(long, default_value_t = DEFAULT_QUADRATURE_TOL)]
        tol: f64,
    },
    /// Compare deviation-from-mean frequencies with the flocking bound (flocking.csv)
    Flocking {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        agent: usize,
        /// Comma-separated deviation thresholds
        #[arg(long, value_delimiter = ',', required = true)]
        delta: Vec<f64>,
    },
    /// Systemic-event log rate against its large-N limit (convergence.csv)
    Convergence {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated population sizes, each a multiple of the group ratio
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60")]
        sizes: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Asymptote::Quadrature)]
        asymptote: Asymptote,
    },
    /// Quadrature against the second-order expansion of V_T^2 (expansion.csv)
    ExpansionError {
        #[command(flatten)]
        config: ConfigArg,
        /// Direction c with sum rho_k c_k = 0; defaults to the config's relative rate deviations
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        /// Centre rate; defaults to the config's weighted mean rate
        #[arg(long)]
        alpha_bar: Option<f64>,
        /// Comma-separated step sizes along the direction
        #[arg(long, value_delimiter = ',', default_value = "0.004,0.002,0.001")]
        deltas: Vec<f64>,
    },
    /// Run a built-in experiment
    Reproduce {
        #[arg(value_enum)]
        preset: Preset,
    },
}

/// Reads and validates a JSON config. Schema errors name the offending field.
pub fn load_config(path: &Path) -> Result<SystemConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let config: SystemConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        CliError::Validation(format!(
            "{}: field `{field}`: {}",
            path.display(),
            e.into_inner()
        ))
    })?;
    config
        .validate()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(config)
}

/// Writes through a temporary file in the target directory, then renames it
/// into place, so readers never observe a partial CSV.
fn write_atomic<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let io_err = |e: &dyn std::fmt::Display| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(&e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| io_err(&e))?;
        w.flush().map_err(|e| io_err(&e))?;
    }
    tmp.persist(path).map_err(|e| io_err(&e.error))?;
    Ok(())
}

struct Context<'a> {
    out_dir: PathBuf,
    seed: Option<u64>,
    reps: Option<usize>,
    mc: MonteCarlo,
    out: &'a mut dyn Write,
}

impl Context<'_> {
    fn seed(&self, cfg: &SystemConfig) -> u64 {
        self.seed.unwrap_or(cfg.seed)
    }

    fn reps(&self, cfg: &SystemConfig) -> usize {
        self.reps.unwrap_or(cfg.replications)
    }

    fn emit<F>(&mut self, name: &str, summary: String, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        let path = self.out_dir.join(name);
        write_atomic(&path, body)?;
        writeln!(self.out, "{}: {summary}", path.display()).map_err(|e| CliError::Io(e.to_string()))
    }

    fn simulate(
        &mut self,
        cfg: &SystemConfig,
        replication: u64,
        name: &str,
    ) -> Result<(), CliError> {
        let layout = validate_and_expand(cfg)?;
        let grid = TimeGrid::from_config(cfg)?;
        let traj = simulate_replication(&layout, &grid, cfg.y0, self.seed(cfg), replication)?;
        let record = detect_defaults(&traj, cfg.eta);
        let summary = format!(
            "{} agents, {} steps, {} defaulted, systemic event {}",
            layout.n_agents(),
            grid.n_steps(),
            record.defaulted_count,
            if record.systemic { "yes" } else { "no" }
        );
        self.emit(name, summary, |w| traj.write_csv(w))
    }

    fn loss_dist(&mut self, cfg: &SystemConfig, name: &str) -> Result<(), CliError> {
        let loss = self
            .mc
            .estimate_loss_distribution(cfg, self.reps(cfg), self.seed(cfg))?;
        let n = loss.n_agents();
        let summary = format!(
            "p_{n} = {:.4} +- {:.4} over {} replications (config {})",
            loss.tail_default_probability, loss.stderr[n], loss.replications, loss.fingerprint
        );
        self.emit(name, summary, |w| write_loss_csv(&loss, w))
    }

    fn variance(&mut self, cfg: &SystemConfig, tol: f64) -> Result<(), CliError> {
        let layout = validate_and_expand(cfg)?;
        let report = variance_report(layout.composition(), cfg.horizon, tol)?;
        let summary = format!(
            "V_T^2 = {} ({} panels)",
            fmt_f64(report.v2_quadrature()),
            report.quadrature.panels
        );
        self.emit("variance.csv", summary, |w| write_variance_csv(&report, w))
    }

    fn flocking(
        &mut self,
        cfg: &SystemConfig,
        agent: usize,
        deltas: &[f64],
    ) -> Result<(), CliError> {
        let layout = validate_and_expand(cfg)?;
        let estimates = self.mc.estimate_flocking_exceedances(
            cfg,
            agent,
            deltas,
            self.reps(cfg),
            self.seed(cfg),
        )?;
        let bounds = deltas
            .iter()
            .map(|&d| bound_if_applicable(&layout, agent, d, cfg.horizon))
            .collect::<Result<Vec<_>, _>>()?;
        let rows: Vec<_> = deltas
            .iter()
            .zip(estimates)
            .zip(bounds)
            .map(|((&d, e), b)| (d, e, b))
            .collect();
        let violations = rows
            .iter()
            .filter(|(_, e, b)| b.is_some_and(|b| e.estimate > b + 3.0 * e.stderr))
            .count();
        let summary = format!(
            "{} thresholds for agent {agent}, {violations} above bound + 3 SE",
            rows.len()
        );
        self.emit("flocking.csv", summary, |w| write_flocking_csv(&rows, w))
    }

    fn convergence(
        &mut self,
        cfg: &SystemConfig,
        sizes: &[usize],
        asymptote: Asymptote,
    ) -> Result<(), CliError> {
        let source = match asymptote {
            Asymptote::Quadrature => AsymptoteSource::default(),
            Asymptote::Expansion => AsymptoteSource::Expansion,
        };
        let rows = self
            .mc
            .convergence_study(cfg, sizes, self.reps(cfg), self.seed(cfg), source)?;
        let last = rows.last().expect("at least one size");
        let summary = format!(
            "{} sizes, rate limit {:.6}, N = {}: log rate {}",
            rows.len(),
            last.asymptote,
            last.n_agents,
            last.log_rate().map_or_else(
                || "unavailable (no events)".to_owned(),
                |r| format!("{r:.6}")
            )
        );
        self.emit("convergence.csv", summary, |w| {
            write_convergence_csv(&rows, w)
        })
    }

    fn expansion(&mut self, rows: Vec<ExpansionRow>) -> Result<(), CliError> {
        let worst = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
        let summary = format!("{} rows, max |error| {worst:.3e}", rows.len());
        self.emit("expansion.csv", summary, |w| write_expansion_csv(&rows, w))
    }

    fn reproduce(&mut self, preset: Preset) -> Result<(), CliError> {
        let configs = preset.configs();
        match preset {
            Preset::GroupA | Preset::GroupB => {
                let cfg = &configs[0];
                self.simulate(cfg, 0, "trajectories.csv")?;
                self.loss_dist(cfg, "loss_hist.csv")?;
                self.variance(cfg, DEFAULT_QUADRATURE_TOL)
            }
            Preset::Table1 | Preset::Table2 => {
                for cfg in &configs {
                    let counts: Vec<usize> = cfg.groups.iter().map(|g| g.count).collect();
                    let name = format!("loss_hist_{}.csv", presets::ratio_label(&counts));
                    self.loss_dist(cfg, &name)?;
                }
                Ok(())
            }
            Preset::VhatTable => {
                let mut rows = Vec::new();
                for &alpha_bar in &presets::VHAT_ALPHA_BARS {
                    rows.extend(expansion_error_study(
                        &presets::VHAT_DIRECTION,
                        &presets::VHAT_RHO,
                        &presets::VHAT_SIGMA,
                        alpha_bar,
                        presets::HORIZON,
                        &[presets::VHAT_DELTA],
                        DEFAULT_QUADRATURE_TOL,
                    )?);
                }
                self.expansion(rows)
            }
            Preset::ConvergenceA811 | Preset::ConvergenceA253 => self.convergence(
                &configs[0],
                &presets::CONVERGENCE_SIZES,
                Asymptote::Quadrature,
            ),
            Preset::ConvergenceVhat10 | Preset::ConvergenceVhat50 | Preset::ConvergenceVhat100 => {
                self.convergence(
                    &configs[0],
                    &presets::CONVERGENCE_SIZES,
                    Asymptote::Expansion,
                )
            }
        }
    }
}

fn bound_if_applicable(
    layout: &PopulationLayout,
    agent: usize,
    delta: f64,
    horizon: f64,
) -> Result<Option<f64>, CliError> {
    match flocking_bound(layout, agent, delta, horizon) {
        Ok(b) => Ok(Some(b.bound)),
        Err(AnalyticsError::NotApplicable { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

struct ExpansionInputs {
    direction: Vec<f64>,
    rho: Vec<f64>,
    sigma: Vec<f64>,
    alpha_bar: f64,
}

fn expansion_inputs(
    cfg: &SystemConfig,
    direction: Option<Vec<f64>>,
    alpha_bar: Option<f64>,
) -> Result<ExpansionInputs, CliError> {
    let layout = validate_and_expand(cfg)?;
    let comp = layout.composition();
    let direction = match direction {
        Some(c) => c,
        None => expansion_coefficients(comp)?.eps,
    };
    let alpha_bar = alpha_bar.unwrap_or_else(|| comp.alpha_bar());
    if alpha_bar.is_nan() || alpha_bar <= 0.0 {
        return Err(CliError::Validation(format!(
            "alpha_bar must be positive, got {alpha_bar}"
        )));
    }
    Ok(ExpansionInputs {
        direction,
        rho: comp.rho().to_vec(),
        sigma: comp.sigma().to_vec(),
        alpha_bar,
    })
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let CommonArgs {
        seed,
        reps,
        out_dir,
        threads,
    } = cli.common;
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mc = MonteCarlo::new(threads)?;
    let mut ctx = Context {
        out_dir,
        seed,
        reps,
        mc,
        out,
    };
    match cli.command {
        Command::Simulate {
            config,
            replication,
        } => {
            let cfg = load_config(&config.config)?;
            ctx.simulate(&cfg, replication, "trajectories.csv")
        }
        Command::LossDist { config } => {
            let cfg = load_config(&config.config)?;
            ctx.loss_dist(&cfg, "loss_hist.csv")
        }
        Command::Variance { config, tol } => {
            let cfg = load_config(&config.config)?;
            ctx.variance(&cfg, tol)
        }
        Command::Flocking {
            config,
            agent,
            delta,
        } => {
            let cfg = load_config(&config.config)?;
            ctx.flocking(&cfg, agent, &delta)
        }
        Command::Convergence {
            config,
            sizes,
            asymptote,
        } => {
            let cfg = load_config(&config.config)?;
            ctx.convergence(&cfg, &sizes, asymptote)
        }
        Command::ExpansionError {
            config,
            direction,
            alpha_bar,
            deltas,
        } => {
            let cfg = load_config(&config.config)?;
            let inputs = expansion_inputs(&cfg, direction, alpha_bar)?;
            let rows = expansion_error_study(
                &inputs.direction,
                &inputs.rho,
                &inputs.sigma,
                inputs.alpha_bar,
                cfg.horizon,
                &deltas,
                DEFAULT_QUADRATURE_TOL,
            )?;
            ctx.expansion(rows)
        }
        Command::Reproduce { preset } => ctx.reproduce(preset),
    }
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit status: 0 on success, 1 for usage, validation and I/O errors,
/// 2 for numerical failures.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    CliError::Usage(text).exit_code()
                }
            };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
