//! `smooth-smc` command line: run reference experiments, check gain
//! certificates, compare methods and sweep parameters.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical abort, 3 qualitative
//! ordering failed (`compare`), 4 gains not certified (`certify`).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smooth_smc::experiment::{Experiment, Method};

pub mod commands;
pub mod spec;

use spec::{GainOverrides, RunSpec, SimOverrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_ORDERING: i32 = 3;
pub const EXIT_UNCERTIFIED: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
        }
    }
}

impl From<smooth_smc::Error> for CliError {
    fn from(e: smooth_smc::Error) -> Self {
        match e {
            smooth_smc::Error::NumericalAbort { .. } | smooth_smc::Error::EigenNoConvergence { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "smooth-smc", version, about = "Adaptive smooth second-order sliding-mode experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one experiment/method cell and write its trajectory and report.
    Run(RunArgs),
    /// Check the gain condition and Lyapunov certificate for a gain set.
    Certify(CertifyArgs),
    /// Run several methods on one experiment and check the expected orderings.
    Compare(CompareArgs),
    /// Run one cell per grid value of a parameter.
    Sweep(SweepArgs),
}

/// Gain and simulation overrides shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    #[arg(long)]
    pub k3: Option<f64>,
    #[arg(long)]
    pub k4: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "l0-init")]
    pub l0_init: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// Config file (if any) overlaid with the flags.
    pub fn spec(&self, experiment: Option<Experiment>, method: Option<Method>) -> Result<RunSpec, CliError> {
        let base = match &self.config {
            Some(path) => RunSpec::from_file(path)?,
            None => RunSpec::default(),
        };
        let flags = RunSpec {
            experiment,
            method,
            gains: GainOverrides {
                k1: self.k1,
                k2: self.k2,
                k3: self.k3,
                k4: self.k4,
                m: self.m,
                kappa: self.kappa,
                epsilon: self.epsilon,
                l0_init: self.l0_init,
            },
            sim: SimOverrides {
                dt: self.dt,
                horizon: self.horizon,
                ..SimOverrides::default()
            },
            out: self.out.clone(),
            ..RunSpec::default()
        };
        Ok(base.overlay(&flags))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_parser = parse_experiment)]
    pub experiment: Option<Experiment>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Initial Lyapunov value for the settling-time bounds.
    #[arg(long = "v0", default_value_t = 1.0)]
    pub v0: f64,
    /// Disturbance bound (sup of the certified perturbation norm).
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// L0 at which decay coefficients are evaluated (default: L0_init).
    #[arg(long)]
    pub l0: Option<f64>,
    /// Adaptation rate at that instant.
    #[arg(long = "l0-dot", default_value_t = 0.0)]
    pub l0_dot: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_parser = parse_experiment)]
    pub experiment: Option<Experiment>,
    /// Comma-separated methods (default: the experiment's reference pair).
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    M,
    K4,
    Kappa,
    Epsilon,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::M => "m",
            SweepParam::K4 => "k4",
            SweepParam::Kappa => "kappa",
            SweepParam::Epsilon => "epsilon",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',', conflicts_with = "range")]
    pub values: Vec<f64>,
    /// Evenly spaced grid `start:stop:count`.
    #[arg(long)]
    pub range: Option<String>,
    #[arg(long, value_parser = parse_experiment)]
    pub experiment: Option<Experiment>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|e: smooth_smc::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: smooth_smc::Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => commands::cmd_run(&a),
        Command::Certify(a) => commands::cmd_certify(&a),
        Command::Compare(a) => commands::cmd_compare(&a),
        Command::Sweep(a) => commands::cmd_sweep(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
