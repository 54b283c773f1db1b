mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncreg::penalty::RawPenaltySpec;
use ncreg::FamilyKind;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ncreg", version, about = "Nonconvex penalty labs: penalties, prox, properties, solvers, asymptotics, MLP training")]
pub struct Cli {
    /// Overrides the seed of single-seed runs (asym, train); for sweep, runs that one seed only.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report file. A `<out>.manifest.json` is written next to it.
    /// Without it, CSV goes to stdout and no manifest is written.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print errors as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Value and derivative of a penalty over a grid (CSV).
    Penalty(PenaltyCmdArgs),
    /// Scalar prox solve, or objective curves with --animate-data.
    Prox(ProxCmdArgs),
    /// Lambda at which the global minimizer jumps to zero.
    Threshold(ThresholdCmdArgs),
    /// Property verdicts for a penalty.
    Properties(PropertiesCmdArgs),
    /// Penalized least-squares or logistic fit of a CSV dataset.
    Fit(FitCmdArgs),
    /// Consistency, bias and approximation studies (JSON config).
    Asym(ConfigOnly),
    /// Train one MLP (JSON config).
    Train(ConfigOnly),
    /// Lambda sweep of MLP training over seeds (JSON config).
    Sweep(ConfigOnly),
}

#[derive(Debug, Args, Default, Clone)]
pub struct PenaltyArgs {
    /// none, l1, l2, bridge, scad, mcp, laplace, arctan, geman_mcclure, log, capped_l1
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// SCAD shape.
    #[arg(long = "a", allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// MCP shape.
    #[arg(long = "b", allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// Bridge exponent.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Geman-McClure and log scale.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Capped-L1 cap.
    #[arg(long = "c", allow_negative_numbers = true)]
    pub c: Option<f64>,
}

impl PenaltyArgs {
    pub fn any(&self) -> bool {
        self.family.is_some()
            || [self.lambda, self.epsilon, self.gamma, self.a, self.b, self.kappa, self.sigma, self.c].iter().any(Option::is_some)
    }

    pub fn raw(&self) -> CliResult<RawPenaltySpec> {
        let name = self.family.as_deref().ok_or_else(|| CliError::flag("--family", "missing --family"))?;
        let kind = FamilyKind::parse(&name.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| CliError::flag("--family", format!("unknown --family `{name}`")))?;
        Ok(RawPenaltySpec {
            family: Some(kind),
            lambda: self.lambda,
            epsilon: self.epsilon,
            gamma: self.gamma,
            a: self.a,
            b: self.b,
            kappa: self.kappa,
            sigma: self.sigma,
            c: self.c,
        })
    }

    pub fn spec(&self) -> CliResult<ncreg::PenaltySpec> {
        self.raw()?.build().map_err(CliError::from_spec_error)
    }
}

#[derive(Debug, Args)]
pub struct PenaltyCmdArgs {
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// lo:hi:n, inclusive.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProxCmdArgs {
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub w_hat: Option<f64>,
    /// Compare against the brute-force grid oracle.
    #[arg(long)]
    pub oracle: bool,
    /// CSV `w,lambda,objective` over lambda in {0.1, 1..15} and w in [-1, 5] step 0.005.
    #[arg(long)]
    pub animate_data: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdCmdArgs {
    /// `--lambda` is optional and ignored.
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub w_hat: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PropertiesCmdArgs {
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Ls,
    Logistic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Cgd,
    Dca,
}

#[derive(Debug, Args)]
pub struct FitCmdArgs {
    /// CSV with a header; last non-role column is the response.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    pub intercept: bool,
    /// Standardize columns before fitting.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fixed step instead of backtracking.
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Skip the coordinate polish of least-squares fits.
    #[arg(long)]
    pub no_polish: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl FitCmdArgs {
    pub fn any_flag(&self) -> bool {
        self.data.is_some()
            || self.penalty.any()
            || self.loss.is_some()
            || self.algorithm.is_some()
            || self.intercept
            || self.standardize
            || self.max_iters.is_some()
            || self.tol.is_some()
            || self.step_size.is_some()
            || self.no_polish
    }
}

#[derive(Debug, Args)]
pub struct ConfigOnly {
    /// JSON config, or a manifest from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
}

fn threads_from_env() -> CliResult<()> {
    let Ok(v) = std::env::var("NONCONVEX_REG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::usage(format!("NONCONVEX_REG_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot size the thread pool: {e}")))
}

fn report(err: &CliError, json: bool) {
    if json {
        eprintln!("{}", err.to_json());
    } else {
        eprintln!("error: {err}");
    }
}

fn main() -> ExitCode {
    // clap errors happen before `json_errors` is parsed
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if json_errors {
                report(&CliError::usage(e.render().to_string().trim().to_string()), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };
    let result = threads_from_env().and_then(|()| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e, cli.json_errors);
            ExitCode::from(e.code() as u8)
        }
    }
}
